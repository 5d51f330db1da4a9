"""Lifelong multi-robot warehouse simulation with sector-level traffic routing."""
from .coordinator import (
    ClosureRegion,
    EntrywayAuthority,
    EntrywayBook,
    ReservationTable,
    TimedPath,
    cbs,
    detect_conflicts,
    handle_comm_failure,
    handle_recovery,
    space_time_astar,
)
from .engine import MetricsReport, Mode, RobotState, SimConfig, Simulation
from .faults import PRESETS, FaultInjector, FaultParams, preset, sample_motion_delays, step_comm_failures
from .scenario import Scenario, load_scenario, parse_scenario
from .tasks import (
    Task,
    TaskQueues,
    TaskStatus,
    allocate,
    enqueue_task,
    generate_tasks,
    load_tasks,
    plan_sector_route,
    release_waiting,
)
from .traffic import TrafficState, WeightParams, compute_edge_weight, compute_heat, update_traffic
from .worldmap import (
    WarehouseMap,
    build_road_graph,
    build_sector_graph,
    load_map,
    parse_map,
    save_map,
    serialize_map,
    validate_partition,
    validate_well_formed,
)

__version__ = "0.1.0"
