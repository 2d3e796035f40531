"""Maximum simulated likelihood estimation for integrated choice and latent
variable (ICLV) mode-choice models with a multinomial logit kernel."""

__version__ = "0.1.0"

from .data import (Alternative, ChoiceDataset, ChoiceTask, ColumnMap,
                   DatasetError, Respondent, load_dataset, save_dataset,
                   summarize, validate_dataset)
from .draws import DrawPlan, halton_sequence, inv_normal_cdf, standard_normal_draws
from .model import (LatentDef, ModelSpec, ModelSpecError, OptimizerOptions,
                    ParameterVector, UtilityTerm, build_parameters,
                    parse_model_file, thresholds, write_model_file)
