from .knn import KnnClassifier
from .metrics import accuracy, majority_baseline
from .persistence import ALGORITHMS, load_model, model_from_dict, model_to_dict, save_model
from .svm import SvmClassifier
from .tree import DecisionTree, RandomForest, gini_importance


def make_model(algorithm, **params):
    """Instantiate a classifier by short name: dt, rf, knn or svm."""
    return ALGORITHMS[algorithm](**params)
