"""Folk tune transcription modelling workbench.

Corpus ingestion and cleaning, ABC tokenization and transposition,
stacked-LSTM language models trained from scratch, sampled generation,
descriptive statistics, and an HTTP composition service.
"""

__version__ = "0.1.0"
