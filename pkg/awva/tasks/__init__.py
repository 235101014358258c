"""
Background workers for Monte Carlo runs
"""
