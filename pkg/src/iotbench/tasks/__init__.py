"""Benchmark task implementations."""

from .ams import AmsSketch, SecondMomentTask, second_moment
from .average import AverageTask, windowed_average
from .basic import CollectSink, Identity, LogSink, SleepTask, precise_sleep
from .bloom import BloomFilter, BloomFilterTask, bloom_insert_and_test
from .chart import ChartTask, emit_chart, line_chart
from .error import ErrorEstimateTask, error_estimate
from .io import (
    BlobDownloadTask,
    BlobUploadTask,
    ModelDownloadTask,
    PublishTask,
    TableQueryTask,
    TriggerSource,
    upload_model,
)
from .kalman import KalmanState, KalmanTask, kalman_update
from .loglog import DistinctCountTask, LogLog, alpha, distinct_count
from .models import ModelArtifact, ModelError, decision_tree, linear_regression
from .parse import ObservationParseTask, RowParseTask, XmlParseTask, xml_leaves, xml_parse
from .predict import (
    DecisionTreeTask,
    LinearRegressionTask,
    classify,
    decision_tree_classify,
    mlr_predict,
    predict,
)
from .registry import IMPLEMENTATIONS, implementation, registry_for
from .regression import SlidingRegressionState, SlidingRegressionTask, sliding_regression

__all__ = [
    "AmsSketch",
    "AverageTask",
    "BlobDownloadTask",
    "BlobUploadTask",
    "BloomFilter",
    "BloomFilterTask",
    "ChartTask",
    "CollectSink",
    "DecisionTreeTask",
    "DistinctCountTask",
    "ErrorEstimateTask",
    "IMPLEMENTATIONS",
    "Identity",
    "KalmanState",
    "KalmanTask",
    "LinearRegressionTask",
    "LogLog",
    "LogSink",
    "ModelArtifact",
    "ModelDownloadTask",
    "ModelError",
    "ObservationParseTask",
    "PublishTask",
    "RowParseTask",
    "SecondMomentTask",
    "SleepTask",
    "SlidingRegressionState",
    "SlidingRegressionTask",
    "TableQueryTask",
    "TriggerSource",
    "XmlParseTask",
    "alpha",
    "bloom_insert_and_test",
    "classify",
    "decision_tree",
    "decision_tree_classify",
    "distinct_count",
    "emit_chart",
    "error_estimate",
    "implementation",
    "kalman_update",
    "line_chart",
    "linear_regression",
    "mlr_predict",
    "precise_sleep",
    "predict",
    "registry_for",
    "second_moment",
    "sliding_regression",
    "upload_model",
    "windowed_average",
    "xml_leaves",
    "xml_parse",
]
