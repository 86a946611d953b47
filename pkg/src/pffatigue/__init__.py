"""Phase-field fatigue crack growth in elastic-plastic solids.

A plane-strain finite-element library and CLI combining a generalised
phase-field fracture description (AT1, AT2, PF-CZM) with fatigue toughness
degradation and combined nonlinear isotropic/kinematic hardening plasticity,
solved monolithically by a quasi-Newton (BFGS) scheme.
"""

from .assembly import GlobalSystem, StateBlock, System, amor_split
from .config import (ConfigError, LoadProgram, SimulationConfig, config_echo,
                     parse_config)
from .driver import PathProbe, RunMetrics, crack_extension, run
from .fatigue import (FatigueLaw, FatigueState, accumulate, default_threshold,
                      fatigue_degradation, fatigue_variable)
from .fracture import (FractureModel, degradation, dissipation, h_min,
                       strength_estimate, update_history)
from .mesh import (DirichletBC, DofMap, FieldState, Mesh, MeshFormatError,
                   insert_seam, load_mesh, remove_elements, save_mesh,
                   structured_rect_mesh)
from .plasticity import (PlasticityParams, PlasticState, ReturnMapError,
                         elastic_strain_split, return_map,
                         uniaxial_stress_response, yield_function, yield_stress)
from .solver import (IncrementResult, LbfgsOperator, SolverAbort, SolverConfig,
                     StepController, line_search, solve_increment,
                     solve_increment_monolithic, solve_increment_staggered)

__version__ = "0.1.0"
