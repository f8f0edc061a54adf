"""Adaptive robust and stochastic MPC with set-membership offset adaptation."""
