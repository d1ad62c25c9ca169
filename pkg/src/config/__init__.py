# Configuración
from src.config.run_config import (
    RunConfig,
    DataConfig,
    ModelConfig,
    HsmConfig,
    RulPredictorConfig,
    PgrConfig,
    MetaConfig,
    LossWeights,
    SyntheticFleetSpec,
    load_config,
    validate_config,
    merge_config,
    build_config,
    resolve_data_root,
)
