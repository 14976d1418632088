from .errors import ConfigError, DataError, GrowthGraphError, NumericalError, SamplerError, TruncatedStoreError
