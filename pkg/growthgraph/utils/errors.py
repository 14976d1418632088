from typing import Optional


class GrowthGraphError(Exception):
    pass


class DataError(GrowthGraphError, ValueError):
    """Bad input values or files; carries whatever location is known."""

    def __init__(self, message: str, *, file: Optional[str] = None, line: Optional[int] = None,
                 row: Optional[object] = None, column: Optional[str] = None):
        self.file = file
        self.line = line
        self.row = row
        self.column = column
        where = []
        if file is not None:
            where.append(f"file={file}")
        if line is not None:
            where.append(f"line={line}")
        if row is not None:
            where.append(f"row={row}")
        if column is not None:
            where.append(f"column={column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ConfigError(GrowthGraphError, ValueError):
    pass


class NumericalError(GrowthGraphError, ArithmeticError):
    pass


class SamplerError(GrowthGraphError):
    def __init__(self, message: str, iteration: int, snapshot_path: Optional[str] = None):
        self.iteration = iteration
        self.snapshot_path = snapshot_path
        super().__init__(f"{message} [iteration {iteration}, snapshot: {snapshot_path}]")


class TruncatedStoreError(GrowthGraphError):
    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"Sample store is incomplete, missing files: {', '.join(self.missing)}")
