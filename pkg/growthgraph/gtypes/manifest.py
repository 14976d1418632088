from typing import Any, Dict, List, Optional

from pydantic import BaseModel


class RunManifest(BaseModel):
    command: str
    config_hash: Optional[str] = None
    data_hashes: Dict[str, str] = {}
    seed: Optional[int] = None
    software_version: str
    started_at: str
    finished_at: Optional[str] = None
    outputs: List[str] = []
    arguments: Dict[str, Any] = {}
