import numpy as np

from ..data import CLASSES
from ..errors import MetricInputError


def f1_micro(y_true, y_pred) -> float:
    """Micro-averaged F1 over the three preference classes.

    Pooled TP / FP / FN counts; for single-label multi-class data this is
    the fraction of matching predictions.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise MetricInputError("y_true and y_pred must be 1-D with equal length")
    if y_true.size == 0:
        raise MetricInputError("f1_micro of an empty label set is undefined")
    tp = fp = fn = 0
    for c in CLASSES:
        t = y_true == c
        p = y_pred == c
        tp += int(np.sum(t & p))
        fp += int(np.sum(~t & p))
        fn += int(np.sum(t & ~p))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0
