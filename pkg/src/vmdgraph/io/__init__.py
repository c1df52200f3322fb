from .config import ConfigError, RunConfig
from .container import read_container, write_container
from .ingest import IngestError, ingest

__all__ = ["ConfigError", "IngestError", "RunConfig", "ingest", "read_container", "write_container"]
