"""Desk-scale simulator of a time-energy entanglement QKD system.

Pipeline: SPDC pair source -> gated SPAD detectors -> time-to-digital
conversion -> coincidence identification and time-bin sifting, plus an
analytic/Monte Carlo Franson-interference branch.
"""

__version__ = "0.1.0"

from .errors import (CapacityError, CoverageError, InvalidParameterError,
                     OrderingError, TagFormatError)
from .source import (PAIR_DTYPE, LossBudget, SourceParams, alpha_per_gate,
                     channel_efficiency, generate_pair_stream, pair_rate)
from .detector import (DETECTION_DTYPE, DetectorParams, GateConfig,
                       coincidence_vs_gate_delay, detect_stream, duty_cycle,
                       gate_acceptance)
from .timetags import (TAG_DTYPE, TdcConfig, make_tags, merge_tags,
                       read_tag_file, record_tags, write_tag_file)
from .sifting import (CoincidenceResult, FrameConfig, RawKeyReport,
                      accidental_rate, delay_scan, estimate_delay,
                      find_coincidences, sift_frames)
from .franson import (DispersionParams, FransonConfig, VisibilityResult,
                      dispersion_spread, fringe_probability, mc_franson,
                      visibility_from_fringe, visibility_model)
