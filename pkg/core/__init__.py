"""Core modules for causal-rescue-lab"""
