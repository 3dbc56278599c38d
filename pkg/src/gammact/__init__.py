"""gammact: limited-detector gamma CT simulation and noise-audit toolkit."""

from .phantom import DiscSpec, GridSpec, Phantom, mu_at, paper_phantom, rasterize
from .projector import (FanGeometry, Ray, Sinogram, fan_rays, ideal_sinogram,
                        line_integral, paper_geometry)
from .detector import (CountSample, DetectorModel, ElectronicsSettings,
                       ScanResult, counts_to_projection, effective_params,
                       sample_counts, sample_scan, scan, substream)
from .recon import (FBPReconstructor, FanToParallelRebinner, FilterSpec,
                    HAMMING_FILTERS, ParallelSinogram, ReconImage, fbp,
                    filter_kernel, get_filter, rebin_fan_to_parallel,
                    reconstruct_all)
from .analysis import (KT1Point, KT1Signature, SweepResult, kt1_signature,
                       normality_score, rank, rmse_ct, sweep)

__version__ = "0.1.0"
