"""Multistatic MIMO radar target localization with coprime L-shaped receive
arrays, built on a coupled canonical polyadic decomposition solved through
joint eigenvalue decomposition."""

from .ccpd import (
    CcpdFactors,
    JevdSolution,
    TargetMatrixSet,
    build_all_targets,
    build_target_matrix,
    check_working_conditions,
    gevd_init,
    recover_factors,
    refine_joint_diag,
    solve,
)
from .doa import DoaEstimate, GeneratorEstimate, doas_from_factors, estimate_generator, resolve_coprime
from .geometry import (
    CoprimeAxisSpec,
    Direction,
    ReceiveArrayLayout,
    TransmitArrayLayout,
    build_axis_set,
    build_receive_layout,
    build_transmit_layout,
    direction_between,
    steering_vector,
)
from .localization import (
    BearingLine,
    LocalizationResult,
    fuse_lines,
    localize_all,
    match_targets,
)
from .scene import (
    ObservationSet,
    RadarScene,
    SceneConfig,
    add_noise,
    sample_rcs,
    sample_targets,
    sample_waveforms,
    simulate,
)
from .tensor_ops import (
    cpd_eval,
    joint_compress_mode2,
    khatri_rao,
    mode2_unfold,
    rank1_approx,
    subtensor_rows,
)

__version__ = "0.1.0"
