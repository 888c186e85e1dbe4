"""
OVID Model
Changeset, user and edit branches fused by multi-head attention into a
stack of prediction layers with a sigmoid output.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from ovid.errors import ConfigViolation, DimMismatch
from ovid.models.dataset import Label
from ovid.models.features import D_EDIT, D_USER, FeatureBundle
from ovid.models.ovid_config import OvidConfig
from ovid.neural.init import kaiming_uniform, ones, xavier_uniform, zeros
from ovid.neural.ops import concat, dropout, fc, layer_norm, multi_head, sigmoid
from ovid.neural.tensor import Parameter, Tensor

logger = logging.getLogger(__name__)

ABLATION_VARIANTS: Dict[str, Dict[str, bool]] = {
    "-Changeset": {"use_changeset": False},
    "-User": {"use_user": False},
    "-Edits": {"use_edits": False},
    "-Changeset&Edits": {"use_changeset": False, "use_edits": False},
    "-User&Edits": {"use_user": False, "use_edits": False},
}


def ablate(config: OvidConfig, variant: str) -> OvidConfig:
    """Config with the branches named by variant switched off"""
    if variant not in ABLATION_VARIANTS:
        raise ConfigViolation(
            f"Unknown ablation variant {variant!r}; expected one of {', '.join(ABLATION_VARIANTS)}"
        )
    return OvidConfig.model_validate({**config.model_dump(), **ABLATION_VARIANTS[variant]})


def classify(y_pred: float, th_class: float = 0.5) -> Label:
    return Label.VANDALISM if y_pred > th_class else Label.REGULAR


class OvidModel:
    """
    Parameters and forward pass of one configuration

    - Parameters are created in a fixed order from a generator seeded by config.seed
    - Ablated branches own no parameters
    - The edit branch runs only for 0 < edits <= th_e_max on complete history;
      otherwise its output is a zero row
    """

    def __init__(self, config: OvidConfig, d_c: int, d_u: int = D_USER, d_e: int = D_EDIT):
        self.config = config
        self.d_c = d_c
        self.d_u = d_u
        self.d_e = d_e
        self.params: Dict[str, Parameter] = {}
        self._build(np.random.default_rng(config.seed))

    def _add(self, param: Parameter) -> Parameter:
        self.params[param.name] = param
        return param

    def _dense(self, name: str, fan_in: int, fan_out: int, rng, projection: bool = False) -> None:
        init = xavier_uniform if projection else kaiming_uniform
        self._add(init(f"W_{name}", fan_in, fan_out, rng))
        self._add(zeros(f"b_{name}", fan_out))

    def _norm(self, name: str, size: int) -> None:
        self._add(ones(f"g_{name}", size))
        self._add(zeros(f"beta_{name}", size))

    def _build(self, rng: np.random.Generator) -> None:
        cfg, d_h = self.config, self.config.d_h
        if cfg.use_changeset:
            self._dense("c", self.d_c, d_h, rng)
        if cfg.use_user:
            self._dense("u", self.d_u, d_h, rng)
        branches = int(cfg.use_changeset) + int(cfg.use_user)
        self._dense("cu", branches * d_h, d_h, rng)
        self._norm("cu", d_h)

        if cfg.use_edits:
            self._dense("e", self.d_e, d_h, rng)
            for i in range(cfg.n_head):
                for proj in ("Q", "K", "V"):
                    self._add(xavier_uniform(f"W_{proj}{i}", d_h, d_h, rng))
            self._add(xavier_uniform("W_O", cfg.n_head * d_h, d_h, rng))
            self._dense("E", d_h, d_h, rng)
            self._norm("E", d_h)

        width = 2 * d_h if cfg.use_edits else d_h
        for j in range(cfg.n_pred):
            self._dense(f"p{j}", width, d_h, rng)
            self._norm(f"p{j}", d_h)
            width = d_h
        self._dense("out", d_h, 1, rng, projection=True)

    def parameters(self) -> List[Parameter]:
        return list(self.params.values())

    def state(self) -> Dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.params.items()}

    def load_state(self, state: Dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise DimMismatch(f"Parameter {name} has shape {value.shape}, expected {p.shape}")
            p.value = value.copy()

    def uses_edits(self, bundle: FeatureBundle) -> bool:
        return (
            self.config.use_edits
            and 0 < bundle.n_edits <= self.config.th_e_max
            and not bundle.missing_history
        )

    def check_dims(self, bundle: FeatureBundle) -> None:
        if bundle.x_c.shape != (self.d_c,) or bundle.x_u.shape != (self.d_u,) or bundle.m_e.shape[0] != self.d_e:
            raise DimMismatch(
                f"Changeset {bundle.changeset_id} features "
                f"x_c{bundle.x_c.shape} x_u{bundle.x_u.shape} m_e{bundle.m_e.shape} do not match "
                f"model dims d_c={self.d_c} d_u={self.d_u} d_e={self.d_e}"
            )

    def forward(
        self,
        bundle: FeatureBundle,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """y_pred as a 1x1 tensor"""
        self.check_dims(bundle)
        cfg, p = self.config, self.params

        branches = []
        if cfg.use_changeset:
            branches.append(fc(Tensor(bundle.x_c[None, :]), p["W_c"], p["b_c"]))
        if cfg.use_user:
            branches.append(fc(Tensor(bundle.x_u[None, :]), p["W_u"], p["b_u"]))
        joined = branches[0] if len(branches) == 1 else concat(branches)
        x_cu = layer_norm(fc(joined, p["W_cu"], p["b_cu"]), p["g_cu"], p["beta_cu"])

        x = x_cu
        if cfg.use_edits:
            if self.uses_edits(bundle):
                m_e = fc(Tensor(bundle.m_e.T), p["W_e"], p["b_e"])
                heads = [(p[f"W_Q{i}"], p[f"W_K{i}"], p[f"W_V{i}"]) for i in range(cfg.n_head)]
                x_e = multi_head(x_cu, m_e, m_e, heads, p["W_O"])
                x_e = layer_norm(fc(x_e, p["W_E"], p["b_E"]), p["g_E"], p["beta_E"])
            else:
                x_e = Tensor(np.zeros((1, cfg.d_h)))
            x = concat([x_cu, x_e])

        for j in range(cfg.n_pred):
            x = fc(x, p[f"W_p{j}"], p[f"b_p{j}"])
            x = dropout(x, cfg.dropout, train, rng)
            x = layer_norm(x, p[f"g_p{j}"], p[f"beta_p{j}"])

        return sigmoid(fc(x, p["W_out"], p["b_out"], activation=None))

    def predict(self, bundle: FeatureBundle) -> float:
        return float(self.forward(bundle).value[0, 0])

    def predict_many(self, bundles: Sequence[FeatureBundle]) -> np.ndarray:
        return np.array([self.predict(b) for b in bundles], dtype=np.float64)
