import numpy as np

from ..exceptions import EmptyDataset, LengthMismatch


def accuracy(predictions, labels):
    """Fraction of predictions equal to the labels."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise LengthMismatch(f"{predictions.shape} predictions vs {labels.shape} labels")
    if labels.size == 0:
        raise EmptyDataset("accuracy of an empty set is undefined")
    return float(np.mean(predictions == labels))


def majority_baseline(labels):
    """Accuracy of always predicting the most frequent label."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyDataset("no labels")
    _, counts = np.unique(labels, return_counts=True)
    return float(counts.max() / labels.size)
