"""Breath-turbulence biometrics toolkit.

Pipeline modules: signal ingestion and segmentation, multifractal analysis
(mfdfa), feature extraction (features), classifiers (learn, httest), the
pairwise model library (library), confirmation/identification (auth), and
synthetic cohorts (synth). Hot numeric kernels live in a compiled extension
with a NumPy fallback (see breathauth._kernels.backend_name()).
"""

from ._kernels import backend_name

__all__ = ["backend_name"]
__version__ = "0.1.0"
