from .stage import Stage
from .simulate import Surrogate, Target, Train, Rollout
from .analyse import Extract, Pca, Ae, Sae, FrameFeatures, Ph, Field, Scatter
