"""eqview: equine radiograph view classification pipeline.

DICOM ingestion, deterministic preprocessing, a from-scratch convolutional
network trained on the 48 standard pre-import views, evaluation with
laterality analysis, class activation maps, and side-marker statistics,
verified at desk scale on a synthetic phantom corpus.
"""

__version__ = "0.1.0"
