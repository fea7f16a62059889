"""Flow-based network intrusion detection toolkit.

Two detectors over network flow records: a supervised DNN classifier with
entity embeddings for high-cardinality categorical features, and an
unsupervised autoencoder that scores flows by reconstruction error. Includes
dataset ingestion (XML and CSV flow files, plus a synthetic generator),
preprocessing, training, evaluation, and a command-line driver.
"""

__version__ = "0.1.0"

from .flows import (  # noqa: F401
    ConfigError,
    FeatureColumn,
    FeatureSchema,
    FlowRecord,
    IngestError,
    LabeledDataset,
    SchemaMismatchError,
    ToolError,
    Vocabulary,
    validate_record,
)
from .ingest import (  # noqa: F401
    IngestReport,
    SyntheticConfig,
    generate_synthetic,
    parse_cic_csv,
    parse_iscx_xml,
    split_stratified,
)
from .models import (  # noqa: F401
    AutoencoderModel,
    DnnModel,
    TrainConfig,
    TrainHistory,
    build_autoencoder,
    build_dnn,
    predict_dnn,
    reconstruction_error,
    train_autoencoder,
    train_dnn,
)
from .preprocess import (  # noqa: F401
    EncodedBatch,
    ScalerParams,
    apply_scaler,
    embedding_dims,
    encode_dataset,
    fit_scaler,
    fit_schema,
    one_hot,
    truncate_ip,
)
