from .cloud import PointCloud, loadCloud
from .extract import extractMacroscopic, extractMicroscopic, windowSubsample, coverage
from .pca import PcaBasis, pcaFit, savePca, loadPca, principalAngles
from .autoencoders import DenseAe, Sae, SaeStats, aeFit, aeEncode, aeDecode, saeFit, saeEncode, perFrameMeanFeatures
from .homology import (DistanceMatrix, PersistenceDiagram, BettiReport, distanceMatrix, maxminSubsample,
  ripsPersistence, reducedPersistence, naivePersistence, significant, bettiReport, bettiAt)
from .fields import VectorField, fieldLines
