"""
Linear NOTEARS structure learning.

Solves  min_W  (1/2n)||X - XW||_F^2 + lambda1 ||W||_1   s.t.  h(W) = tr(e^{W*W}) - d = 0
with an augmented Lagrangian outer loop and L-BFGS-B on the positive/negative split of W.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.optimize as sopt

from core.errors import DataError, DimensionError, SolverError
from core.graphs import DirectedGraph
from core.models import NotearsConfig

logger = logging.getLogger(__name__)

MAX_SERIES_TERMS = 40
SERIES_TOL = 1e-18
SCALING_NORM = 0.5


def matrix_exponential(a: np.ndarray) -> np.ndarray:
    """e^A by scaling and squaring around a truncated Taylor series"""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix_exponential needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError("matrix_exponential input has non-finite entries")
    d = a.shape[0]
    norm = np.linalg.norm(a, 1) if d else 0.0
    squarings = int(np.ceil(np.log2(norm / SCALING_NORM))) if norm > SCALING_NORM else 0
    scaled = a / (2.0 ** squarings)

    result = np.eye(d)
    term = np.eye(d)
    for k in range(1, MAX_SERIES_TERMS + 1):
        term = term @ scaled / k
        result = result + term
        if np.linalg.norm(term, 1) <= SERIES_TOL * np.linalg.norm(result, 1):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def _h_and_grad(w: np.ndarray) -> Tuple[float, np.ndarray]:
    d = w.shape[0]
    e = matrix_exponential(w * w)
    h = max(0.0, float(np.trace(e) - d))
    return h, e.T * w * 2.0


def acyclicity_h(w: np.ndarray) -> float:
    """h(W) = tr(e^{W*W}) - d; zero exactly on weighted adjacencies of DAGs"""
    w = np.asarray(w, dtype=np.float64)
    return max(0.0, float(np.trace(matrix_exponential(w * w)) - w.shape[0]))


def acyclicity_grad(w: np.ndarray) -> np.ndarray:
    """grad h(W) = (e^{W*W})^T * 2W"""
    return _h_and_grad(np.asarray(w, dtype=np.float64))[1]


def least_squares_loss_grad(x: np.ndarray, w: np.ndarray) -> Tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError(f"Data must be a non-empty n x d matrix, got shape {x.shape}")
    if w.shape != (x.shape[1], x.shape[1]):
        raise DimensionError(f"W shape {w.shape} does not match {x.shape[1]} data columns")
    n = x.shape[0]
    residual = x - x @ w
    loss = 0.5 / n * float((residual ** 2).sum())
    grad = -1.0 / n * (x.T @ residual)
    np.fill_diagonal(grad, 0.0)
    return loss, grad


@dataclass(frozen=True)
class NotearsResult:
    weights: np.ndarray
    graph: DirectedGraph
    final_h: float
    converged: bool
    h_history: Tuple[float, ...] = ()
    rho: float = 1.0
    dual_iterations: int = 0

    @property
    def thresholded_weights(self) -> np.ndarray:
        return np.where(self.graph.adjacency, self.weights, 0.0)


def _encode(x: np.ndarray, encoding: str) -> np.ndarray:
    if encoding == "raw":
        return x.copy()
    if encoding == "centered":
        return x - x.mean(axis=0, keepdims=True)
    encoded = x.copy()
    for j in range(x.shape[1]):
        column = x[:, j]
        if np.all((column == 0.0) | (column == 1.0)):
            encoded[:, j] = 2.0 * column - 1.0
    return encoded


def _fixed_zero_mask(labels: Sequence[str], cfg: NotearsConfig) -> np.ndarray:
    d = len(labels)
    index = {label: i for i, label in enumerate(labels)}
    mask = np.eye(d, dtype=bool)
    for src, dst in cfg.tabu_edges:
        if src in index and dst in index:
            mask[index[src], index[dst]] = True
    for name in cfg.tabu_parent_nodes:
        if name in index:
            mask[index[name], :] = True
    for name in cfg.tabu_child_nodes:
        if name in index:
            mask[:, index[name]] = True
    return mask


def _project_to_dag(weights: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """Drop the weakest edge of each remaining cycle until the graph is acyclic"""
    adjacency = adjacency.copy()
    while True:
        graph = nx.from_numpy_array(adjacency.astype(np.int8), create_using=nx.DiGraph)
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return adjacency
        # Weakest first; among equals drop the edge pointing back to an earlier column
        src, dst, *_ = min(cycle, key=lambda e: (abs(weights[e[0], e[1]]), -(e[0] > e[1]), -e[0]))
        logger.debug(f"[Notears] Dropping edge {src}->{dst} (|w|={abs(weights[src, dst]):.4f}) to break a cycle")
        adjacency[src, dst] = False


def fit(x: np.ndarray, cfg: Optional[NotearsConfig] = None,
        labels: Optional[Sequence[str]] = None) -> NotearsResult:
    """Learn a DAG from an n x d data matrix. Deterministic: W0 = 0 and L-BFGS-B inner solves."""
    cfg = (cfg or NotearsConfig()).validate()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"Data must be 2-dimensional, got shape {x.shape}")
    n, d = x.shape
    if d == 0:
        raise DimensionError("Data has no variables (d = 0)")
    if n == 0:
        raise DataError("Data has no rows (n = 0)")
    if not np.all(np.isfinite(x)):
        raise DataError("Data contains non-finite values")
    labels = tuple(labels) if labels is not None else tuple(f"x{i}" for i in range(d))
    if len(labels) != d:
        raise DimensionError(f"{len(labels)} labels for {d} data columns")

    if d == 1:
        return NotearsResult(np.zeros((1, 1)), DirectedGraph.empty(labels), 0.0, True)

    data = _encode(x, cfg.encoding)
    fixed = _fixed_zero_mask(labels, cfg)
    free_bounds = [(0.0, 0.0) if fixed[i, j] else (0.0, None) for i in range(d) for j in range(d)]
    bounds = free_bounds + free_bounds
    below_diagonal = np.tril(np.ones((d, d)), k=-1)
    l1 = (cfg.lambda1 + cfg.order_tiebreak * below_diagonal).ravel()
    l1_doubled = np.concatenate([l1, l1])

    def _adj(w_flat: np.ndarray) -> np.ndarray:
        return (w_flat[:d * d] - w_flat[d * d:]).reshape(d, d)

    def _objective(w_flat: np.ndarray, rho: float, alpha: float):
        w = _adj(w_flat)
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                loss, g_loss = least_squares_loss_grad(data, w)
                h, g_h = _h_and_grad(w)
            except DataError:
                return np.inf, np.zeros_like(w_flat)
            obj = loss + 0.5 * rho * h * h + alpha * h + float(l1_doubled @ w_flat)
            g_smooth = (g_loss + (rho * h + alpha) * g_h).ravel()
            grad = np.concatenate([g_smooth + l1, -g_smooth + l1])
        # L-BFGS-B backtracks on inf
        if not np.isfinite(obj) or not np.all(np.isfinite(grad)):
            return np.inf, np.zeros_like(w_flat)
        return obj, grad

    w_est = np.zeros(2 * d * d)
    rho, alpha, h = 1.0, 0.0, np.inf
    history: List[float] = []
    iterations = 0
    for iterations in range(1, cfg.max_dual_iter + 1):
        w_new, h_new, accepted = None, None, False
        while rho < cfg.rho_max:
            try:
                sol = sopt.minimize(
                    _objective, w_est, args=(rho, alpha), method="L-BFGS-B", jac=True,
                    bounds=bounds,
                    options={"maxiter": cfg.inner_max_iter, "gtol": cfg.inner_gtol, "ftol": 1e-15},
                )
            except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
                raise SolverError(f"Inner solve failed at rho={rho:.1e}: {e}", last_exception=e) from e
            w_new = sol.x
            h_new = acyclicity_h(_adj(w_new))
            if h_new > 0.25 * h:
                rho *= 10.0
            else:
                accepted = True
                break
        if w_new is None:
            break
        # rho ran out without enough progress; never step to a larger h
        if not accepted and h_new > h:
            break
        w_est, h = w_new, h_new
        history.append(h)
        alpha += rho * h
        if h <= cfg.h_tol or rho >= cfg.rho_max:
            break

    weights = _adj(w_est)
    np.fill_diagonal(weights, 0.0)
    converged = bool(h <= cfg.h_tol)
    adjacency = np.abs(weights) > cfg.w_threshold
    np.fill_diagonal(adjacency, False)
    adjacency = _project_to_dag(weights, adjacency)
    graph = DirectedGraph(labels, adjacency)
    if not converged:
        logger.warning(f"[Notears] Dual loop stopped at h={h:.3e} (rho={rho:.1e}); graph projected to a DAG")
    logger.debug(f"[Notears] n={n} d={d} edges={graph.edge_count} h={h:.3e} iters={iterations}")
    return NotearsResult(
        weights=weights,
        graph=graph,
        final_h=float(h),
        converged=converged,
        h_history=tuple(history),
        rho=rho,
        dual_iterations=iterations,
    )
