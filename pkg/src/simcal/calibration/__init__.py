from .codebook import Codebook, CodebookResult, codebook_search
from .gradient import GradientSettings, StageResult, block_scales, prior_scales, run_gradient_stage
from .monitor import DriftingSource, MonitorLog, TriggerEvent, state_driven_monitor
from .objective import (
    NMSE_FLOOR_DB,
    nmse_db,
    pilot_loss,
    pilot_loss_and_gradient,
    pilot_loss_gradient,
    slot_losses,
)
from .protocol import (
    MULTI_STAGE,
    SINGLE_STAGE,
    CalibrationTrace,
    PilotSource,
    StagePlan,
    StageRecord,
    run_multistage,
)
