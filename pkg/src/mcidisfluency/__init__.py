"""Speech and disfluency features for separating MCI from cognitively normal speakers.

Pipeline: energy/ZCR voice activity detection splits each recording into a
speech stream and a disfluency (pause) stream; classical, perceptual and
non-linear features are computed on both; a Mann-Whitney filter and SVM
recursive elimination select features; k-NN, SVM, MLP and CNN classifiers
are scored with stratified cross-validation.
"""

__version__ = "0.1.0"
