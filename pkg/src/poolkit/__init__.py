"""poolkit: pooling-problem formulations, rank-one convexifications,
LP/MIP relaxations and bound tightening."""

from .instances import (MiningSchedule, PoolingInstance, convert_mining,
                        generalize, parse_instance, parse_mining)
from .rank1 import (BoundBox, brute_force_bound, build_colwise_extension,
                    build_intersection, build_rowcol_extension,
                    build_rowwise_extension, check_extreme_point_property,
                    enumerate_hull_pieces, gen_rlt_conic, gen_rlt_mccormick,
                    gen_rlt_reverse_convex, is_rank_le_one, make_box,
                    membership_T, normalize, sample_rank_one_points)
from .formulations import (build_mcf_relaxation, build_source_based,
                           build_terminal_based, check_solution, pool_blocks)
from .relaxations import (MethodSpec, build_method, build_mip_relaxation,
                          build_mip_restriction, build_relaxation,
                          inject_valid_inequalities, parse_method)
from .tightening import BoundUpdate, apply_bounds, mining_tighten, obbt
from .bench import compute_gap, exact_value, run_grid
from .modelir import ModelIR, dump_model, parse_dump
from .solver import SolveParams, SolveResult, solve

__version__ = "0.1.0"
