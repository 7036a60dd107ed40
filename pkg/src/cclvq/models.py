"""Parametric function families for experts and the weight classifier.

Four kinds are provided, each mapping an input to R^out:

* ``constant`` — a fixed output vector, independent of the input; the
  parameters are the output itself.
* ``lookup`` — one output vector per label of a finite input space.
* ``affine`` — ``W x + b`` on vector inputs.
* ``mlp`` — one hidden tanh layer of configurable width on vector inputs.

Parameters live in a single flat float64 vector whose layout is layer-major
and row-major (``affine``: W rows then b; ``mlp``: W1 rows, b1, W2 rows, b2).
That layout is part of the JSON serialization contract. All gradients are
exact backpropagation, checked against central finite differences in the
test suite.

Used as an expert, a function's output is a point prediction in R^d. Used
as a classifier, its outputs are logits: ``classify`` clips them to ±30
(gradients stay exact strictly inside the clipped range) and applies
softmax, so the result is always a strictly positive probability vector.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .geometry import loss_grads, loss_values

FUNCTION_KINDS = ("constant", "lookup", "affine", "mlp")

LOGIT_CAP = 30.0

LOG_2 = float(np.log(2.0))


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass(eq=False)
class ParamFunction:
    """A parametric map with a flat parameter vector.

    ``in_dim`` is the input dimension for vector kinds and ignored for
    ``constant``; ``n_labels`` is the label count for ``lookup``; ``hidden``
    is the hidden width for ``mlp``.
    """

    kind: str
    out_dim: int
    params: np.ndarray
    in_dim: int = 0
    n_labels: int = 0
    hidden: int = 0

    def __post_init__(self):
        if self.kind not in FUNCTION_KINDS:
            raise ValidationError(f"unknown function kind {self.kind!r}")
        p = np.asarray(self.params, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(p)):
            raise ValidationError("parameters contain non-finite values")
        if p.size != self.n_params:
            raise ValidationError(
                f"{self.kind} expects {self.n_params} parameters, got {p.size}"
            )
        self.params = p

    @property
    def n_params(self) -> int:
        if self.kind == "constant":
            return self.out_dim
        if self.kind == "lookup":
            return self.n_labels * self.out_dim
        if self.kind == "affine":
            return self.out_dim * self.in_dim + self.out_dim
        return (
            self.hidden * self.in_dim
            + self.hidden
            + self.out_dim * self.hidden
            + self.out_dim
        )

    @property
    def input_kind(self) -> str:
        return "label" if self.kind == "lookup" else "vector"

    def with_params(self, params: np.ndarray) -> "ParamFunction":
        return replace(self, params=np.asarray(params, dtype=np.float64).copy())

    # -- forward ---------------------------------------------------------

    def _unpack(self):
        p = self.params
        if self.kind == "affine":
            w = p[: self.out_dim * self.in_dim].reshape(self.out_dim, self.in_dim)
            b = p[self.out_dim * self.in_dim :]
            return w, b
        if self.kind == "mlp":
            h, i, o = self.hidden, self.in_dim, self.out_dim
            ofs = 0
            w1 = p[ofs : ofs + h * i].reshape(h, i)
            ofs += h * i
            b1 = p[ofs : ofs + h]
            ofs += h
            w2 = p[ofs : ofs + o * h].reshape(o, h)
            ofs += o * h
            b2 = p[ofs:]
            return w1, b1, w2, b2
        raise AssertionError(self.kind)

    def _check_inputs(self, xs) -> np.ndarray:
        if self.kind == "lookup":
            arr = np.asarray(xs)
            if arr.ndim != 1:
                arr = arr.reshape(-1)
            if not np.issubdtype(arr.dtype, np.integer):
                if np.any(arr != np.floor(arr)):
                    raise ValidationError("lookup inputs must be integer labels")
                arr = arr.astype(np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= self.n_labels):
                bad = arr[(arr < 0) | (arr >= self.n_labels)][0]
                raise ValidationError(
                    f"unknown label {int(bad)} (declared label count {self.n_labels})"
                )
            return arr
        arr = np.asarray(xs, dtype=np.float64)
        if self.kind == "constant":
            return arr if arr.ndim else arr.reshape(1)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] != self.in_dim:
            raise DimensionMismatchError(
                f"expected inputs of dimension {self.in_dim}, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("inputs contain non-finite values")
        return arr

    def forward_batch(self, xs) -> np.ndarray:
        """Evaluate on a batch; returns (N, out_dim)."""
        xs = self._check_inputs(xs)
        if self.kind == "constant":
            n = xs.shape[0]
            return np.broadcast_to(self.params, (n, self.out_dim)).copy()
        if self.kind == "lookup":
            table = self.params.reshape(self.n_labels, self.out_dim)
            return table[xs].copy()
        if self.kind == "affine":
            w, b = self._unpack()
            return xs @ w.T + b
        w1, b1, w2, b2 = self._unpack()
        return np.tanh(xs @ w1.T + b1) @ w2.T + b2

    def forward(self, x) -> np.ndarray:
        """Evaluate on a single input; returns (out_dim,)."""
        return self.forward_batch(self._lift(x))[0]

    def _lift(self, x):
        if self.kind == "lookup":
            return np.asarray([x])
        if self.kind == "constant":
            return np.asarray([0.0]) if np.isscalar(x) else np.asarray(x).reshape(1, -1)
        return np.asarray(x, dtype=np.float64).reshape(1, -1)

    # -- backward --------------------------------------------------------

    def vjp_batch(self, xs, cotangents: np.ndarray) -> np.ndarray:
        """Sum over the batch of J(x_j)^T @ cotangents[j], as a flat vector."""
        xs = self._check_inputs(xs)
        cots = np.asarray(cotangents, dtype=np.float64)
        if self.kind == "constant":
            return cots.sum(axis=0)
        if self.kind == "lookup":
            grad = np.zeros((self.n_labels, self.out_dim))
            np.add.at(grad, xs, cots)
            return grad.reshape(-1)
        if self.kind == "affine":
            dw = cots.T @ xs
            db = cots.sum(axis=0)
            return np.concatenate([dw.reshape(-1), db])
        w1, b1, w2, _ = self._unpack()
        hidden = np.tanh(xs @ w1.T + b1)
        dw2 = cots.T @ hidden
        db2 = cots.sum(axis=0)
        dhidden = cots @ w2
        dz1 = dhidden * (1.0 - hidden**2)
        dw1 = dz1.T @ xs
        db1 = dz1.sum(axis=0)
        return np.concatenate([dw1.reshape(-1), db1, dw2.reshape(-1), db2])


def make_function(
    kind: str,
    out_dim: int,
    *,
    in_dim: int = 0,
    n_labels: int = 0,
    hidden: int = 20,
    rng: np.random.Generator | None = None,
    params: np.ndarray | None = None,
) -> ParamFunction:
    """Build a function of the given kind, initialized per the package
    convention: biases zero, weight matrices uniform in ±sqrt(6/(fan_in+fan_out))."""
    if out_dim < 1:
        raise ValidationError("out_dim must be >= 1")
    if kind == "lookup" and n_labels < 1:
        raise ValidationError("lookup kind requires n_labels >= 1")
    if kind in ("affine", "mlp") and in_dim < 1:
        raise ValidationError(f"{kind} kind requires in_dim >= 1")
    if kind == "mlp" and hidden < 1:
        raise ValidationError("mlp kind requires hidden >= 1")

    if kind == "constant":
        shape_args = dict(out_dim=out_dim)
        default = np.zeros(out_dim)
    elif kind == "lookup":
        shape_args = dict(out_dim=out_dim, n_labels=n_labels)
        default = np.zeros(n_labels * out_dim)
    elif kind == "affine":
        shape_args = dict(out_dim=out_dim, in_dim=in_dim)
        rng = rng or np.random.default_rng(0)
        default = np.concatenate([_glorot(rng, out_dim, in_dim).reshape(-1), np.zeros(out_dim)])
    elif kind == "mlp":
        shape_args = dict(out_dim=out_dim, in_dim=in_dim, hidden=hidden)
        rng = rng or np.random.default_rng(0)
        default = np.concatenate(
            [
                _glorot(rng, hidden, in_dim).reshape(-1),
                np.zeros(hidden),
                _glorot(rng, out_dim, hidden).reshape(-1),
                np.zeros(out_dim),
            ]
        )
    else:
        raise ValidationError(f"unknown function kind {kind!r}")
    return ParamFunction(kind=kind, params=default if params is None else params, **shape_args)


# -- expert-side helpers ---------------------------------------------------


def grad_params(fn: ParamFunction, x, y, loss: str = "squared") -> np.ndarray:
    """Exact gradient of loss(y, fn(x)) in the flat parameters."""
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    xs = fn._lift(x)
    pred = fn.forward_batch(xs)
    return fn.vjp_batch(xs, loss_grads(pred, y, loss))


def grad_params_batch(fn: ParamFunction, xs, ys, loss: str = "squared") -> np.ndarray:
    """Gradient of the summed loss over a batch (Algorithm-style sum, not mean)."""
    ys = np.asarray(ys, dtype=np.float64)
    pred = fn.forward_batch(xs)
    return fn.vjp_batch(xs, loss_grads(pred, ys, loss))


def batch_loss(fn: ParamFunction, xs, ys, loss: str = "squared") -> np.ndarray:
    return loss_values(fn.forward_batch(xs), np.asarray(ys, dtype=np.float64), loss)


# -- classifier-side helpers ------------------------------------------------


def _clipped_softmax(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Softmax of logits clipped to ±LOGIT_CAP; also returns the mask of
    entries strictly inside the cap (where the clip gradient is 1)."""
    clipped = np.clip(logits, -LOGIT_CAP, LOGIT_CAP)
    shifted = clipped - clipped.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=-1, keepdims=True)
    inside = np.abs(logits) < LOGIT_CAP
    return probs, inside


def classify_batch(fn: ParamFunction, xs) -> np.ndarray:
    """Probability vectors (N, n): softmax over capped logits."""
    probs, _ = _clipped_softmax(fn.forward_batch(xs))
    return probs


def classify(fn: ParamFunction, x) -> np.ndarray:
    return classify_batch(fn, fn._lift(x))[0]


def grad_classifier_batch(fn: ParamFunction, xs, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy -log p_label over the batch."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= fn.out_dim):
        raise ValidationError(f"label out of range 0..{fn.out_dim - 1}")
    logits = fn.forward_batch(xs)
    probs, inside = _clipped_softmax(logits)
    cots = probs.copy()
    cots[np.arange(labels.size), labels] -= 1.0
    cots *= inside
    cots /= labels.size
    return fn.vjp_batch(xs, cots)


def grad_classifier(fn: ParamFunction, x, label: int) -> np.ndarray:
    """Gradient of -log p_label(x) in the flat classifier parameters."""
    return grad_classifier_batch(fn, fn._lift(x), np.asarray([label]))


def output_bias_slice(fn: ParamFunction) -> slice:
    """Flat-parameter slice of the output-space offset block: the constant
    vector for ``constant``, the whole table for ``lookup`` (every row moves
    together), and the final bias for ``affine``/``mlp``."""
    if fn.kind in ("constant", "lookup"):
        return slice(0, fn.params.size)
    return slice(fn.params.size - fn.out_dim, fn.params.size)


def offset_output(fn: ParamFunction, delta: np.ndarray) -> ParamFunction:
    """Shift the function by a constant vector: returns g with
    g(x) = fn(x) + delta for every input."""
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    if delta.size != fn.out_dim:
        raise DimensionMismatchError(f"offset has size {delta.size}, output has {fn.out_dim}")
    params = fn.params.copy()
    sl = output_bias_slice(fn)
    if fn.kind == "lookup":
        params = params.reshape(fn.n_labels, fn.out_dim)
        params += delta
        params = params.reshape(-1)
    else:
        params[sl] += np.tile(delta, (sl.stop - sl.start) // fn.out_dim)
    return fn.with_params(params)


def set_output_bias(fn: ParamFunction, target: np.ndarray) -> ParamFunction:
    """Make the function constant at ``target``: zero the final linear layer
    (``affine``/``mlp``) or the whole value block (``constant``/``lookup``)
    and put ``target`` in the output bias. Earlier layers are untouched."""
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.size != fn.out_dim:
        raise DimensionMismatchError(f"target has size {target.size}, output has {fn.out_dim}")
    params = fn.params.copy()
    if fn.kind == "constant":
        params = target.copy()
    elif fn.kind == "lookup":
        params = np.tile(target, fn.n_labels)
    elif fn.kind == "affine":
        params[: fn.out_dim * fn.in_dim] = 0.0
        params[fn.out_dim * fn.in_dim :] = target
    else:
        n_head = fn.out_dim * fn.hidden + fn.out_dim
        params[-n_head:-fn.out_dim] = 0.0
        params[-fn.out_dim :] = target
    return fn.with_params(params)


def split_output(fn: ParamFunction, index: int) -> ParamFunction:
    """Add one output component that mirrors component ``index``.

    The mirrored pair each produce the original logit minus log 2 (for every
    input), so under softmax the pair's combined mass equals the original
    component's and all other components keep their probabilities exactly.
    """
    if not 0 <= index < fn.out_dim:
        raise ValidationError(f"output index {index} out of range")
    if fn.kind == "constant":
        c = fn.params.copy()
        c[index] -= LOG_2
        new = np.concatenate([c, [c[index]]])
        return ParamFunction(kind="constant", out_dim=fn.out_dim + 1, params=new)
    if fn.kind == "lookup":
        table = fn.params.reshape(fn.n_labels, fn.out_dim).copy()
        table[:, index] -= LOG_2
        new = np.hstack([table, table[:, index : index + 1]])
        return ParamFunction(
            kind="lookup", out_dim=fn.out_dim + 1, n_labels=fn.n_labels, params=new.reshape(-1)
        )
    if fn.kind == "affine":
        w, b = fn._unpack()
        w, b = w.copy(), b.copy()
        b[index] -= LOG_2
        w_new = np.vstack([w, w[index : index + 1]])
        b_new = np.concatenate([b, [b[index]]])
        return ParamFunction(
            kind="affine",
            out_dim=fn.out_dim + 1,
            in_dim=fn.in_dim,
            params=np.concatenate([w_new.reshape(-1), b_new]),
        )
    w1, b1, w2, b2 = fn._unpack()
    w2, b2 = w2.copy(), b2.copy()
    b2[index] -= LOG_2
    w2_new = np.vstack([w2, w2[index : index + 1]])
    b2_new = np.concatenate([b2, [b2[index]]])
    return ParamFunction(
        kind="mlp",
        out_dim=fn.out_dim + 1,
        in_dim=fn.in_dim,
        hidden=fn.hidden,
        params=np.concatenate([w1.reshape(-1), b1, w2_new.reshape(-1), b2_new]),
    )
