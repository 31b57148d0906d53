"""A small feed-forward network trained with backpropagation and Adam."""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .._validation import as_deadline, check_is_fitted
from ..exceptions import NumericalFailure


class MLPNetwork:
    """Fully connected tanh network with a linear scalar output.

    ``layer_sizes`` lists every layer width including the input and the
    output (``[n_in, ..., 1]``); ``[n_in, 1]`` is a single linear unit.
    Parameters are stored as ``[W_0, b_0, W_1, b_1, ...]``.
    """

    def __init__(self, layer_sizes, learning_rate=1e-3, seed=None,
                 optimizer="adam", beta1=0.9, beta2=0.999, eps=1e-8):
        rng = np.random.default_rng(seed)
        self.layer_sizes = list(layer_sizes)
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.params = []
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            limit = np.sqrt(6.0 / (n_in + n_out))
            self.params.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
            self.params.append(np.zeros(n_out))
        self._m = [np.zeros_like(p) for p in self.params]
        self._v = [np.zeros_like(p) for p in self.params]
        self.steps = 0

    @property
    def n_layers(self):
        return len(self.params) // 2

    def forward(self, X, return_cache=False):
        a = np.asarray(X, dtype=float)
        cache = [a]
        for k in range(self.n_layers):
            z = a @ self.params[2 * k] + self.params[2 * k + 1]
            a = z if k == self.n_layers - 1 else np.tanh(z)
            cache.append(a)
        out = a[:, 0]
        return (out, cache) if return_cache else out

    def loss_and_grads(self, X, y):
        """Mean squared error and its gradient w.r.t. every parameter."""
        y = np.asarray(y, dtype=float)
        out, cache = self.forward(X, return_cache=True)
        n = y.shape[0]
        resid = out - y
        loss = float(np.mean(resid ** 2))
        delta = (2.0 / n) * resid[:, None]
        grads = [None] * len(self.params)
        for k in reversed(range(self.n_layers)):
            a_prev = cache[k]
            grads[2 * k] = a_prev.T @ delta
            grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.params[2 * k].T) * (1.0 - cache[k] ** 2)
        return loss, grads

    def apply_gradients(self, grads):
        self.steps += 1
        lr = self.learning_rate
        if self.optimizer == "sgd":
            for p, g in zip(self.params, grads):
                p -= lr * g
            return
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.steps
        corr2 = 1.0 - b2 ** self.steps
        for p, g, m, v in zip(self.params, grads, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)

    def train_step(self, X, y):
        loss, grads = self.loss_and_grads(X, y)
        if not np.isfinite(loss):
            raise NumericalFailure("non-finite training loss")
        self.apply_gradients(grads)
        return loss


def mlp_train_step(network, batch):
    """One gradient step on ``batch = (X, y)``; returns ``(network, loss)``."""
    X, y = batch
    loss = network.train_step(X, y)
    return network, loss


class MLPRegressor(RegressorMixin, BaseEstimator):
    """Tabular regressor backed by :class:`MLPNetwork`.

    Inputs and targets are standardised internally.
    """

    def __init__(self, hidden_size=32, n_layers=1, learning_rate=1e-3,
                 epochs=50, batch_size=32, random_state=None):
        self.hidden_size = hidden_size
        self.n_layers = n_layers
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y, deadline=None):
        deadline = as_deadline(deadline)
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.x_mean_ = X.mean(axis=0)
        x_std = X.std(axis=0)
        self.x_std_ = np.where(x_std > 0, x_std, 1.0)
        self.y_mean_ = float(y.mean())
        y_std = float(y.std())
        self.y_std_ = y_std if y_std > 0 else 1.0
        Xs = (X - self.x_mean_) / self.x_std_
        ys = (y - self.y_mean_) / self.y_std_

        rng = np.random.default_rng(self.random_state)
        sizes = [X.shape[1]] + [int(self.hidden_size)] * int(self.n_layers) + [1]
        net = MLPNetwork(sizes, learning_rate=self.learning_rate,
                         seed=int(rng.integers(2**31)))
        n = Xs.shape[0]
        bs = max(1, min(int(self.batch_size), n))
        self.loss_curve_ = []
        for _ in range(int(self.epochs)):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, bs):
                deadline.check()
                idx = order[start:start + bs]
                total += net.train_step(Xs[idx], ys[idx]) * idx.size
            self.loss_curve_.append(total / n)
        self.network_ = net
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        Xs = (np.asarray(X, dtype=float) - self.x_mean_) / self.x_std_
        out = self.network_.forward(Xs) * self.y_std_ + self.y_mean_
        if not np.all(np.isfinite(out)):
            raise NumericalFailure("MLP produced non-finite predictions")
        return out
