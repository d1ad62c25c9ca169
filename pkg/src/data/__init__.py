"""
Ingesta, preprocesamiento y armado de meta-tareas.
"""
from src.data.records import MetaTask, SampleBatch, SampleWindow, TaskBatches, UnitRecord
from src.data.cmapss import load_cmapss, select_sensors
from src.data.preprocessing import apply_cs, cap_rul, ewma, fit_conditions, global_standardize, sliding_windows
from src.data.vibration import extract_vibration_features, mask_nonoperating, rank_features_pearson
from src.data.synthetic import synthesize_degradation_fleet
from src.data.tasks import build_meta_tasks, select_support
from src.data.cache import ProcessedDataset
from src.data.pipeline import dataset_tasks, load_dataset

__all__ = [
    "MetaTask",
    "SampleBatch",
    "SampleWindow",
    "TaskBatches",
    "UnitRecord",
    "load_cmapss",
    "select_sensors",
    "apply_cs",
    "cap_rul",
    "ewma",
    "fit_conditions",
    "global_standardize",
    "sliding_windows",
    "extract_vibration_features",
    "mask_nonoperating",
    "rank_features_pearson",
    "synthesize_degradation_fleet",
    "build_meta_tasks",
    "select_support",
    "ProcessedDataset",
    "dataset_tasks",
    "load_dataset",
]
