"""Regularized generative modeling laboratory.

Closed-form bias-variance analysis of regularized Gaussian fitting,
non-parametric solvers for energy-regularized KL/JS objectives, and a small
numpy GAN trainer with a data-dependent feature energy.
"""

__version__ = "0.1.0"
