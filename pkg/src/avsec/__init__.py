"""Action-vector representations and audio features for sound event classification.

Subpackages cover the full pipeline: clip/fold bookkeeping (:mod:`avsec.dataset`),
rating ingestion and action vectors (:mod:`avsec.annotations`), audio features
(:mod:`avsec.dsp`, :mod:`avsec.features`), classifiers (:mod:`avsec.svm`,
:mod:`avsec.mlp`), the cross-validation harness (:mod:`avsec.evaluation`),
AV structure analysis (:mod:`avsec.analysis`), and a crowd annotation service
(:mod:`avsec.service`). The ``avsec`` command wires them together.
"""

from .errors import AvsecError, DataError, LeakageError, NumericError

__version__ = "0.1.0"

__all__ = ["AvsecError", "DataError", "LeakageError", "NumericError", "__version__"]
