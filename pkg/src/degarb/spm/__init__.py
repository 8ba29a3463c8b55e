"""Single-particle electrochemical cell model with thermal and SEI ageing."""

from .cell import (
    SpmCellState,
    SpmModel,
    arrhenius_scale,
    butler_volmer_overpotential,
    diffusion_step,
    exchange_current_density,
    sei_apply,
    sei_flux,
    soc_estimate,
    spm_step,
    thermal_step,
)
from .params import OcvCurve, PackError, SpmParams, load_pack, write_pack
