from __future__ import annotations

import numpy as np

from revsent.autodiff import Adam, Linear, Module, Tensor, backward, no_grad, ops
from revsent.classical.base import Baseline, as_dense, as_matrix
from revsent.errors import ShapeError


class _Net(Module):
    def __init__(self, n_in: int, hidden, n_out: int, rng):
        self.layers = []
        sizes = [n_in, *hidden]
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            layer = Linear(a, b, rng)
            setattr(self, f"hidden{i}", layer)
            self.layers.append(layer)
        self.out = Linear(sizes[-1], n_out, rng)

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = ops.relu(layer(x))
        return self.out(x)


class Mlp(Baseline):
    """Feed-forward classifier on the autodiff engine (ReLU, softmax output).

    With a validation set, training stops once more than ``patience``
    consecutive epochs fail to lower the validation loss and the best
    weights are kept, as for the deep models.
    """

    name = "mlp"

    def __init__(self, hidden=(256, 128), lr: float = 1e-3, n_epochs: int = 20, batch_size: int = 32,
                 seed: int = 0, patience: int | None = 2):
        self.hidden = tuple(int(h) for h in hidden)
        self.lr = lr
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.seed = seed
        self.patience = patience
        self.net_: _Net | None = None
        self.loss_history_: list[float] = []
        self.val_loss_history_: list[float] = []
        self.best_epoch_: int | None = None

    def _loss(self, X, y) -> float:
        total = 0.0
        with no_grad():
            for start in range(0, X.shape[0], 1024):
                logits = self.net_(Tensor(as_dense(X[start:start + 1024])))
                total += ops.cross_entropy(logits, y[start:start + 1024]).item() * logits.shape[0]
        return total / X.shape[0]

    def fit(self, X, y, validation=None):
        X = as_matrix(X)
        y = self._check_fit_input(X, y)
        if validation is not None:
            X_val, y_val = as_matrix(validation[0]), np.asarray(validation[1], dtype=np.int64)
            if X_val.shape[0] == 0 or X_val.shape[1] != X.shape[1] or y_val.shape != (X_val.shape[0],):
                raise ShapeError(f"validation set {X_val.shape} does not match training features {X.shape}")
        rng = np.random.default_rng(self.seed)
        self.net_ = _Net(X.shape[1], self.hidden, self.n_classes_, rng)
        opt = Adam(self.net_.trainable_parameters(), lr=self.lr)
        self.loss_history_, self.val_loss_history_, self.best_epoch_ = [], [], None
        best, best_state, stale = np.inf, None, 0
        n = X.shape[0]
        for epoch in range(1, self.n_epochs + 1):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                b = order[start:start + self.batch_size]
                # sparse rows are densified one batch at a time
                loss = ops.cross_entropy(self.net_(Tensor(as_dense(X[b]))), y[b])
                opt.zero_grad()
                backward(loss)
                opt.step()
                total += loss.item() * b.size
            self.loss_history_.append(total / n)
            if validation is None:
                continue
            val = self._loss(X_val, y_val)
            self.val_loss_history_.append(val)
            if val < best:
                best, best_state, stale, self.best_epoch_ = val, self.net_.state_dict(), 0, epoch
            else:
                stale += 1
                if self.patience is not None and stale > self.patience:
                    break
        if best_state is not None:
            self.net_.load_state_dict(best_state)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        self._check_predict_input(X)
        out = np.empty((X.shape[0], self.n_classes_))
        with no_grad():
            for start in range(0, X.shape[0], 1024):
                logits = self.net_(Tensor(as_dense(X[start:start + 1024]))).data.astype(np.float64)
                z = logits - logits.max(axis=1, keepdims=True)
                e = np.exp(z)
                out[start:start + logits.shape[0]] = e / e.sum(axis=1, keepdims=True)
        return out

    def get_state(self):
        cfg = {"hidden": list(self.hidden), "lr": self.lr, "n_epochs": self.n_epochs,
               "batch_size": self.batch_size, "seed": self.seed, "patience": self.patience,
               "n_features": self.n_features_, "n_classes": self.n_classes_}
        return dict(self.net_.state_dict()), cfg

    @classmethod
    def from_state(cls, arrays, config):
        m = cls(config["hidden"], config["lr"], config["n_epochs"], config["batch_size"], config["seed"],
                config.get("patience"))
        m.n_features_, m.n_classes_ = config["n_features"], config["n_classes"]
        m.net_ = _Net(m.n_features_, m.hidden, m.n_classes_, np.random.default_rng(0))
        m.net_.load_state_dict(arrays)
        return m
