"""Nonlinear perturbation modes of stationary NLS solutions."""
