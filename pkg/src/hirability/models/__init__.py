from .linear import (
    LOGISTIC, OLS, RIDGE, SVC, SVR, LinearModel, SingularDesignError, SubsetFit,
    best_subset_r2, fit_linear_sv, fit_logistic, fit_ols, fit_ridge,
)
from .nb import BERNOULLI, MULTINOMIAL, NaiveBayesModel, fit_nb
from .tree import (
    CLASSIFICATION, REGRESSION, DecisionTreeModel, RandomForestModel, fit_cart, fit_forest,
)

MODEL_CLASSES = {
    cls.family: cls
    for cls in (LinearModel, NaiveBayesModel, DecisionTreeModel, RandomForestModel)
}

__all__ = [
    "LinearModel", "NaiveBayesModel", "DecisionTreeModel", "RandomForestModel",
    "SingularDesignError", "SubsetFit", "MODEL_CLASSES",
    "fit_ols", "fit_ridge", "fit_logistic", "fit_linear_sv", "best_subset_r2",
    "fit_nb", "fit_cart", "fit_forest",
    "OLS", "RIDGE", "LOGISTIC", "SVR", "SVC", "BERNOULLI", "MULTINOMIAL",
    "REGRESSION", "CLASSIFICATION",
]
