"""Upwind discontinuous Galerkin solver and hp-convergence lab for b.grad(u) + c u = f."""
