from .errors import GradGateError
from .tensor import GradientTape, backward, gradWrtInput, forwardOp
from .architecture import ArchSpec, LayerSpec
from .classifier import Classifier, ParamSet, TrainConfig, buildClassifier, trainClassifier, forwardWithActivations, \
    saveCheckpoint, loadCheckpoint
from .data import Dataset, genGlyphs, genOod, split, saveDataset, loadDataset
from .idx_interface import loadIdx, writeIdx
from .attack import AttackConfig, AttackResult, createAttack
from .signattacks import fgsm, bim, pgd, iterll
from .cwattack import cwL2
from .semanticattack import semantic
from .confoundinglabel import ConfoundingLabel, makeConfoundingLabel
from .featureextractor import GradFeature, ActivFeature, GradientFeatureExtractor, ActivationFeatureExtractor, \
    extractGradientFeatures, extractActivationFeatures, layerwiseGradientNorms, normSummary
from .detector import DetectorMLP, assembleDetectionSets, trainDetector, score, mspScores
from .metrics import ScoredSample, MetricReport, auroc, aupr, detectionAccuracy, evaluate
from .csv_interface import writeFeatures, parseFeatures, parseFeatureData, writeScores, parseScores
from .config import ExperimentConfig
from .experiment import Experiment
