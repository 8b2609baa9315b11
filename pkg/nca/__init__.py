from .errors import NcaScopeError, ContractError, ValidationError, FormatError, TrainingDiverged
from .grid import ChannelMode, GridState, aliveMask, seedState, applyPerturbation
from .model import NcaModel, modelInit, saveModel, loadModel, modelHash
from .events import Event, EventScript, signalEvent, perturbEvent
from .engine import perceive, updateStep, rollout
from .trajectory import Trajectory, saveTrajectory, loadTrajectory
from .trainer import TrainConfig, LossLog, train, lossRmse, finiteDiffGradient, analyticGradient
