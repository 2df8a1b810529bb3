"""Two-step TV-Stokes denoising.

Step 1 smooths the tangent field of a noisy image under a divergence-free
constraint; step 2 rebuilds an image that follows the smoothed field.  Both
steps are solved through their dual problems with Chambolle's fixed-point
iteration, either on the whole grid or by overlapping domain decomposition.
"""
from .grid import Grid, Rect, ShapeError, read_tvsf, write_tvsf
from .kernels import BACKEND, NumericalDivergence
from .ops import div, grad, multi_div, multi_grad, tangent_field
from .projection import project_global
from .spectral import laplacian_pinv
from .solvers import SolverConfig, chambolle_ir, chambolle_tfs
from .decomposition import DdConfig, alpha_hat_for, build_layout, build_partition_of_unity, dd_solve
from .metrics import mssim, perf_tau, psnr
from .images import NoiseSpec, add_noise, load_image, phantom, save_image
from .pipeline import DdSettings, PipelineConfig, dd_experiment, run_tvstokes, sweep

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DdConfig", "DdSettings", "Grid", "NoiseSpec", "NumericalDivergence",
    "PipelineConfig", "Rect", "ShapeError", "SolverConfig", "add_noise", "alpha_hat_for",
    "build_layout", "build_partition_of_unity", "chambolle_ir", "chambolle_tfs",
    "dd_experiment", "dd_solve", "div", "grad", "laplacian_pinv", "load_image", "mssim",
    "multi_div", "multi_grad", "perf_tau", "phantom", "project_global", "psnr",
    "read_tvsf", "run_tvstokes", "save_image", "sweep", "tangent_field", "write_tvsf",
]
