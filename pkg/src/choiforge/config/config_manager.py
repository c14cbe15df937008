"""
Configuration management for choiforge.
Provides layered configuration (shipped defaults, environment file, instance
file, CHOIFORGE_ environment variables) validated against a pydantic schema,
and converts sections into the typed settings the library consumes.
"""

import hashlib
import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Tuple, Type, Union, cast

import yaml
from pydantic import BaseModel, Field, TypeAdapter, ValidationError
from pydantic.fields import FieldInfo

from choiforge.campaigns.validation import ValidationSettings
from choiforge.exceptions import InputError
from choiforge.optimizer.losses import LossConfig, LossMode
from choiforge.optimizer.train import TrainConfig
from choiforge.sdp.conic import ExtendSide, SolverOptions

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_DIR = Path(__file__).parent
ENV_PREFIX = "CHOIFORGE_"


class Environment(Enum):
    """Supported run environments"""

    DEVELOPMENT = "development"
    TESTING = "testing"
    PRODUCTION = "production"


class ConfigSchema(BaseModel):
    """Configuration schema definition"""

    class Solver(BaseModel):
        """Conic solver configuration"""

        name: str = Field(default="CLARABEL", description="cvxpy solver name")
        feasibility_tol: float = Field(default=1e-8, gt=0, description="Primal/dual feasibility tolerance")
        duality_gap_tol: float = Field(default=1e-8, gt=0, description="Duality gap tolerance")
        max_iterations: int = Field(default=200, ge=1, description="Interior-point iteration cap")
        extend_side: ExtendSide = Field(
            default=ExtendSide.SECOND, description="Subsystem carrying the symmetric extension"
        )
        cert_tol: float = Field(default=1e-7, gt=0, description="Margin for certificate verdicts")
        max_extension_dim: int = Field(
            default=256, ge=1, description="Largest extension space dimension"
        )

    class Loss(BaseModel):
        """Loss hyperparameters"""

        epsilon: float = Field(default=0.05, gt=0, description="Non-decomposability margin")
        gamma: float = Field(default=2.0, gt=0, description="Positivity hinge weight")
        delta: float = Field(default=0.01, ge=0, description="Positivity margin in bound mode")
        omega: float = Field(default=1.0, ge=0, description="Spectral-bound hinge weight")
        nu: float = Field(default=0.01, ge=0, description="Spectral-bound margin")
        k: int = Field(default=2, ge=2, description="Extension level")
        tp_penalty_weight: float = Field(default=1.0, ge=0, description="Soft TP penalty weight")

    class Training(BaseModel):
        """Optimizer configuration"""

        learning_rate: float = Field(default=0.01, gt=0, description="Adam step size")
        max_epochs: int = Field(default=2000, ge=1, description="Epoch budget")
        seed: int = Field(default=0, ge=0, description="Random seed")
        adam_beta1: float = Field(default=0.9, ge=0, lt=1, description="First-moment decay")
        adam_beta2: float = Field(default=0.999, ge=0, lt=1, description="Second-moment decay")
        adam_eps: float = Field(default=1e-8, gt=0, description="Adam denominator offset")
        init_scale: Optional[float] = Field(default=None, description="Initial std override")

    class Generators(BaseModel):
        """Constructive generator configuration"""

        ancilla_dim: Optional[int] = Field(default=None, description="Dilation ancilla; d when unset")
        ppt_penalty_weight: float = Field(default=10.0, ge=0, description="PPT hinge weight")
        positivity_weight: float = Field(default=2.0, gt=0, description="T1 positivity hinge weight")

    class Campaign(BaseModel):
        """Campaign runner configuration"""

        jobs: int = Field(default=1, ge=1, description="Parallel runs")
        output_dir: str = Field(default="runs", description="Artifact root")
        runs_per_cell: int = Field(default=20, ge=1, description="Runs per grid cell")

    class Validation(BaseModel):
        """Found-map validation configuration"""

        probe_samples: int = Field(default=10_000, ge=1, description="See-saw starting points")
        seesaw_iters: int = Field(default=20, ge=0, description="See-saw refinements per start")
        zeta_tol: float = Field(default=1e-6, gt=0, description="Slack on zeta_1 against -epsilon")
        probe_tol: float = Field(default=1e-6, gt=0, description="Slack on the probe minimum")
        tp_tol: float = Field(default=1e-12, gt=0, description="TP residual bound")

    class Monitoring(BaseModel):
        """Logging and metrics configuration"""

        log_level: str = Field(default="INFO", description="Logging level")
        log_format: str = Field(default="text", description="text or json")
        metrics_port: Optional[int] = Field(default=None, description="Prometheus exposition port")

    solver: Solver = Field(default_factory=Solver)
    loss: Loss = Field(default_factory=Loss)
    training: Training = Field(default_factory=Training)
    generators: Generators = Field(default_factory=Generators)
    campaign: Campaign = Field(default_factory=Campaign)
    validation: Validation = Field(default_factory=Validation)
    monitoring: Monitoring = Field(default_factory=Monitoring)


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """
    Layered configuration: default.yaml, <environment>.yaml, instance.yaml,
    then CHOIFORGE_<SECTION>_<KEY> environment variables.
    """

    def __init__(
        self,
        config_dir: Optional[Union[str, Path]] = None,
        environment: Optional[Environment] = None,
    ):
        self.config_dir = Path(config_dir) if config_dir else DEFAULT_CONFIG_DIR
        self.environment = environment or self._detect_environment()
        self._config: Dict[str, Any] = {}
        self._schema = ConfigSchema

    def initialize(self) -> "ConfigManager":
        """Load configuration from all sources"""
        try:
            config = self._load_default_config()
            config = _deep_merge(config, self._load_environment_config())
            config = _deep_merge(config, self._load_instance_config())
            config = _deep_merge(config, self._load_environment_variables())
            self._config = self._validate_config(config)
            logger.debug(f"Configuration initialized for environment: {self.environment.value}")
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Configuration initialization failed: {str(e)}")
            raise InputError(f"Configuration could not be loaded: {str(e)}")
        return self

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by dotted key with optional default"""
        try:
            value = self._config
            for part in key.split("."):
                value = value[part]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key: str, value: Any) -> None:
        """Set one value after validating it against the schema"""
        path = key.split(".")
        validated = self._validate_value(path, value)
        current = self._config
        *parts, last = path
        for part in parts:
            current = current.setdefault(part, {})
        current[last] = validated.value if isinstance(validated, Enum) else validated

    def override(self, key: str, value: Any) -> None:
        """set() that ignores None, for optional CLI flags"""
        if value is not None:
            self.set(key, value)

    def as_dict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(self._config))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the effective configuration"""
        canonical = json.dumps(self._config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def export_config(self, path: Union[str, Path]) -> None:
        """Export effective configuration to YAML"""
        with open(path, "w") as f:
            yaml.safe_dump(self.as_dict(), f, default_flow_style=False)

    def solver_options(self) -> SolverOptions:
        s = self._config["solver"]
        return SolverOptions(
            solver=s["name"],
            feasibility_tol=s["feasibility_tol"],
            duality_gap_tol=s["duality_gap_tol"],
            max_iterations=s["max_iterations"],
            extend_side=ExtendSide(s["extend_side"]),
            cert_tol=s["cert_tol"],
            max_extension_dim=s["max_extension_dim"],
        )

    def loss_config(self, mode: LossMode = LossMode.MAIN) -> LossConfig:
        return LossConfig(mode=mode, **self._config["loss"])

    def train_config(self) -> TrainConfig:
        t = self._config["training"]
        betas: Tuple[float, float] = (t["adam_beta1"], t["adam_beta2"])
        return TrainConfig(
            learning_rate=t["learning_rate"],
            max_epochs=t["max_epochs"],
            seed=t["seed"],
            adam_betas=betas,
            adam_eps=t["adam_eps"],
            init_scale=t["init_scale"],
        )

    def validation_settings(self) -> ValidationSettings:
        v = self._config["validation"]
        return ValidationSettings(
            epsilon=self._config["loss"]["epsilon"],
            k=self._config["loss"]["k"],
            probe_samples=v["probe_samples"],
            seesaw_iters=v["seesaw_iters"],
            zeta_tol=v["zeta_tol"],
            probe_tol=v["probe_tol"],
            tp_tol=v["tp_tol"],
        )

    def _detect_environment(self) -> Environment:
        """Detect run environment"""
        env = os.getenv(f"{ENV_PREFIX}ENV", "development").lower()
        try:
            return Environment(env)
        except ValueError:
            logger.warning(f"Unknown environment {env}, using development")
            return Environment.DEVELOPMENT

    def _load_default_config(self) -> Dict[str, Any]:
        return self._load_yaml(self.config_dir / "default.yaml")

    def _load_environment_config(self) -> Dict[str, Any]:
        return self._load_yaml(self.config_dir / f"{self.environment.value}.yaml", required=False)

    def _load_instance_config(self) -> Dict[str, Any]:
        return self._load_yaml(self.config_dir / "instance.yaml", required=False)

    def _load_environment_variables(self) -> Dict[str, Any]:
        """CHOIFORGE_<SECTION>_<KEY>; the key keeps its own underscores"""
        config: Dict[str, Any] = {}
        sections = set(ConfigSchema.model_fields)
        for key, value in os.environ.items():
            if not key.startswith(ENV_PREFIX):
                continue
            parts = key[len(ENV_PREFIX):].lower().split("_", 1)
            if len(parts) == 2 and parts[0] in sections:
                config.setdefault(parts[0], {})[parts[1]] = value
        return config

    def _load_yaml(self, path: Path, required: bool = True) -> Dict[str, Any]:
        if path.exists():
            with open(path) as f:
                return yaml.safe_load(f) or {}
        if required:
            raise FileNotFoundError(f"Required config file not found: {path}")
        return {}

    def _validate_config(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """Validate configuration against schema, returning the normalized dict"""
        try:
            return ConfigSchema(**config).model_dump(mode="json")
        except ValidationError as e:
            raise InputError(f"Configuration validation failed: {str(e)}")

    def _validate_value(self, path: List[str], value: Any) -> Any:
        """Validate a single configuration value"""
        current_schema = cast(Type[BaseModel], self._schema)
        for part in path[:-1]:
            fields = cast(Dict[str, FieldInfo], current_schema.model_fields)
            if part not in fields:
                raise InputError(f"Invalid configuration path: {'.'.join(path)}")
            current_schema = cast(Type[BaseModel], fields[part].annotation)

        fields = cast(Dict[str, FieldInfo], current_schema.model_fields)
        if path[-1] not in fields:
            raise InputError(f"Invalid configuration key: {'.'.join(path)}")
        field_info = fields[path[-1]]
        try:
            annotated: Any = field_info.annotation
            if field_info.metadata:
                annotated = Annotated[(field_info.annotation, *field_info.metadata)]
            return TypeAdapter(annotated).validate_python(value)
        except ValidationError as e:
            raise InputError(f"Invalid value for {'.'.join(path)}: {str(e)}")
