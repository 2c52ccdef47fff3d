"""
Configuration models for training and evaluation

Every block is a pydantic model so that YAML files, environment overrides
and command-line flags are validated in one place.
"""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


class TrainConfig(BaseModel):
    """Optimizer and early-stopping settings for one neural model"""

    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(0.001, gt=0, description="Adam learning rate.")
    max_epochs: int = Field(30, ge=1, description="Upper bound on training epochs.")
    patience: int = Field(5, ge=1, description="Epochs without validation improvement before stopping.")
    batch_size: int = Field(32, ge=1)
    dropout_seed: int = Field(0, description="Seed for shuffling, dropout masks and initialization.")
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)
    clip_norm: Optional[float] = Field(5.0, description="Global gradient-norm clip; None disables.")

    @model_validator(mode="after")
    def _check_patience(self) -> "TrainConfig":
        if self.patience > self.max_epochs:
            raise ValueError(f"patience ({self.patience}) must not exceed max_epochs ({self.max_epochs})")
        return self


class StackerConfig(BaseModel):
    """Full-batch logistic-regression settings for the stacking meta-classifier"""

    model_config = ConfigDict(extra="forbid")

    l2: float = Field(1e-4, ge=0, description="L2 penalty strength.")
    learning_rate: float = Field(1.0, gt=0, description="Gradient-descent step size.")
    tolerance: float = Field(1e-6, gt=0, description="Stop once the gradient norm falls below this.")
    max_iterations: int = Field(5000, ge=1)


class SvmConfig(BaseModel):
    """TF-IDF + linear SVM baseline settings"""

    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(0.01, gt=0)
    epochs: int = Field(200, ge=1)
    alphas: List[float] = Field(default_factory=lambda: [1e-5, 1e-4, 1e-3],
                                description="L2 strengths tried; the best on validation is kept.")
    seed: int = 0


def _context_train_config() -> TrainConfig:
    return TrainConfig(max_epochs=30, patience=5)


def _layout_train_config() -> TrainConfig:
    return TrainConfig(max_epochs=600, patience=200)


class PipelineConfig(BaseModel):
    """Everything needed to train the full labeling pipeline"""

    model_config = ConfigDict(extra="forbid")

    seed: int = 13
    split_ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    validation_fraction: float = Field(0.1, ge=0, lt=1)
    min_count: int = Field(1, ge=1)
    embedding_dim: int = Field(50, ge=1)
    embeddings_path: Optional[str] = None
    trainable_embeddings: Optional[bool] = Field(
        None, description="Defaults to False with pretrained vectors, True otherwise.")
    rules: str = Field("mgb", description="Rule set name (mgb, mimic) or path to a rule file.")
    raw_layout_counts: bool = Field(False, description="Use raw character counts in layout features.")
    workers: int = Field(3, ge=1, le=3)
    label_merge_map: Dict[str, str] = Field(default_factory=dict,
                                            description="Extra raw label spellings -> canonical label.")
    focus: TrainConfig = Field(default_factory=_context_train_config)
    surrounding: TrainConfig = Field(default_factory=_context_train_config)
    layout: TrainConfig = Field(default_factory=_layout_train_config)
    merged: TrainConfig = Field(default_factory=_context_train_config)
    stacker: StackerConfig = Field(default_factory=StackerConfig)
    svm: SvmConfig = Field(default_factory=SvmConfig)

    @model_validator(mode="after")
    def _check_split_ratios(self) -> "PipelineConfig":
        if any(r < 0 for r in self.split_ratios) or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError(f"split_ratios must be non-negative and sum to 1, got {self.split_ratios}")
        return self

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Copy with every random stream derived from one seed"""
        update = {"seed": seed}
        for offset, name in enumerate(("focus", "surrounding", "layout", "merged")):
            block = getattr(self, name)
            update[name] = block.model_copy(update={"dropout_seed": seed * 10 + offset})
        update["svm"] = self.svm.model_copy(update={"seed": seed})
        return self.model_copy(update=update)


def parse_pipeline_config(data: dict) -> PipelineConfig:
    """Validate a raw mapping into a PipelineConfig

    Raises:
        ConfigError: With pydantic's message when validation fails
    """
    try:
        return PipelineConfig.model_validate(data or {})
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
