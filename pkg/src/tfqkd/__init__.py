"""Secret-key rates of coherent-state twin-field QKD over lossy fiber."""

from .channel import (
    ChannelParams,
    Observables,
    OperatingPoint,
    decoy_gain,
    link_efficiencies,
    protocol1_observables,
    yield_exact,
)
from .decoy import (
    DecoyIntensities,
    f_correlator,
    phase_error_gain_upper,
    protocol2_observables,
    yield_upper,
)
from .keyrate import (
    RateResult,
    b_step,
    gl_b_step,
    gl_p_step,
    lin_ideal_rate,
    one_way_rate,
    plob_bound,
    pm_qkd_error_gain,
    two_way_rate,
)
from .numerics import ErrorTriple, bessel_i0, binary_entropy, binomial, conditional_entropy
from .optimizer import CurvePoint, SweepSpec, optimize_intensity, run_sweep

__version__ = "0.1.0"
