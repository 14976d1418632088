import os
from typing import Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    # Overrides --out and the config's output.dir when set
    output_dir: Optional[str] = None
    log_level: str = "INFO"
    # Thread fan-out for per-cluster graph updates; results are merged in cluster order
    n_workers: int = 1
    # Assert zero pattern and positive definiteness after every graph update
    check_invariants: bool = False

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        if self.output_dir:
            self.output_dir = os.path.abspath(os.path.expanduser(self.output_dir))
        self.n_workers = max(1, self.n_workers)

    def resolve_output_dir(self, requested: Optional[str]) -> str:
        """Environment override first, then the command line / config value."""
        if self.output_dir:
            return self.output_dir
        return os.path.abspath(os.path.expanduser(requested or "."))

    class Config:
        env_prefix = "GROWTHGRAPH_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        extra = "ignore"  # Allow additional environment variables


settings = Settings()
