"""Copy-enhanced dialogue state tracker.

Thin python surface over the C++ core: corpus I/O, synthetic-corpus
generation, unknown-value masking, training, evaluation, and checkpoints.
"""

try:
    from ._cedst import (  # installed wheel: extension lives inside the package
        AblationFlags,
        Corpus,
        Model,
        ParseError,
        SchemaError,
        SynthConfig,
        TrainConfig,
        evaluate,
        generate_synthetic,
        load_checkpoint,
        load_corpus,
        mask_unknown_values,
        save_checkpoint,
        save_corpus,
        train,
    )
except ImportError:  # in-tree build: extension sits next to the package on PYTHONPATH
    from _cedst import (
        AblationFlags,
        Corpus,
        Model,
        ParseError,
        SchemaError,
        SynthConfig,
        TrainConfig,
        evaluate,
        generate_synthetic,
        load_checkpoint,
        load_corpus,
        mask_unknown_values,
        save_checkpoint,
        save_corpus,
        train,
    )

__all__ = [
    "AblationFlags",
    "Corpus",
    "Model",
    "ParseError",
    "SchemaError",
    "SynthConfig",
    "TrainConfig",
    "evaluate",
    "generate_synthetic",
    "load_checkpoint",
    "load_corpus",
    "mask_unknown_values",
    "save_checkpoint",
    "save_corpus",
    "train",
]
