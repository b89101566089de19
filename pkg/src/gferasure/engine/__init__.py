from .instruments import (M_Q1, M_Q2, AssignmentModel, ErasureInstrument, apply_erasure_check,
                          erasure_branches, measure_qutrit)
from .master import (EvolutionSpec, IntegrationError, MasterResult, evolve_master, kraus_to_superop,
                     liouvillian, propagator, superop_to_choi, superop_to_kraus, unitary_superop)
from .trajectories import (CheckStep, KrausStep, MeasureStep, Program, ProgramResult, SnapshotStep,
                           TrajectoryResult, run_program, run_trajectories)
