from .settings import settings
from .run_config import (
    DataSection,
    McmcSection,
    ModelSection,
    OutputSection,
    ProcessSpec,
    RunConfig,
    SamplerConfig,
    SimulationSection,
    load_run_config,
)

__all__ = [
    "settings",
    "DataSection",
    "McmcSection",
    "ModelSection",
    "OutputSection",
    "ProcessSpec",
    "RunConfig",
    "SamplerConfig",
    "SimulationSection",
    "load_run_config",
]
