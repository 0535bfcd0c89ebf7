"""Fisher-information accounting for post-selected weak-value amplification."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateError, NotHermitianError, NotNormalizedError,
                     NullPostselectionError, PostselectionImpossibleError,
                     SingularInformationError, WVAError)
from .quantum import (SIGMA_X, SIGMA_Y, SIGMA_Z, HermitianObservable, MeterModel,
                      QubitAngles, SystemState, bloch_state, gaussian_meter, meter_moment,
                      spectral_decompose)
from .protocol import (ConditionalMeterState, MeterFunctions, PostSelection, Protocol,
                       WeakValue, conditional_meter_state, meter_functions,
                       near_eigenstate_fixture, optimal_postselection, overlap_delta,
                       postselect_probability, weak_value)
from .fisher import (FisherReport, MeasurementSpec, budget_batch, classical_fisher,
                     fm_bound, fpf_info, fps_total, measurement_fisher, qfi_coupling,
                     qfi_fidelity, qfi_pure, qubit_closed_forms)
from .series import (Regime, RegimeLabel, SeriesCoefficients, SeriesFisher, SeriesTarget,
                     dip_profile, expand_moments_series, regime_classify, series_fisher)
from .montecarlo import (CRBSummary, ExperimentConfig, ExperimentDataset, MLEResult,
                         crb_report, log_likelihood, mle_estimate, read_dataset,
                         sample_dataset, write_dataset)
from .kernels import BACKEND

__all__ = [name for name in dir() if not name.startswith("_")]
