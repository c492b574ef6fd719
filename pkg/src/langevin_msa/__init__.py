"""Langevin Monte Carlo with mean-square-analysis bounds."""
