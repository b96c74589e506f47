import numpy as np
import pytest

from vamgrid.nn import AdamW, AdamWState, Linear, Module, adamw_step, load_tensors, param, save_tensors
from vamgrid.tensor import ContractError, Tensor


def test_adam_step_matches_hand_computation():
    w = param([1.0, -2.0])
    w.grad = np.array([0.5, 0.25])
    st = AdamWState(learning_rate=0.1, betas=(0.9, 0.999), weight_decay=0.0, epsilon=1e-8)
    adamw_step([w], st)
    g = np.array([0.5, 0.25])
    m_hat = (0.1 * g) / (1 - 0.9)
    v_hat = (0.001 * g * g) / (1 - 0.999)
    expected = np.array([1.0, -2.0]) - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
    np.testing.assert_allclose(w.data, expected, rtol=1e-15)
    # first Adam step moves each coordinate by about lr
    np.testing.assert_allclose(np.abs(w.data - [1.0, -2.0]), [0.1, 0.1], rtol=1e-6)


def test_weight_decay_is_decoupled():
    w = param([3.0])
    w.grad = np.array([0.0])
    adamw_step([w], AdamWState(learning_rate=0.1, weight_decay=0.5))
    # zero gradient: only the decay acts, w *= 1 - lr * wd
    np.testing.assert_allclose(w.data, [3.0 * (1 - 0.05)], rtol=1e-15)


def test_descent_on_square():
    w = param([1.0])
    opt = AdamW([w], lr=0.1, weight_decay=0.0)
    prev = 1.0
    for _ in range(5):
        opt.zero_grad()
        (w * w).sum().backward()
        opt.step()
        assert 0 <= abs(w.data[0]) < prev
        prev = abs(w.data[0])


def test_small_reference_lr_accepted():
    assert AdamWState(learning_rate=1e-5).learning_rate == 1e-5


@pytest.mark.parametrize("kw", [{"learning_rate": 0}, {"betas": (1.0, 0.9)}, {"weight_decay": -1}])
def test_invalid_state_rejected(kw):
    with pytest.raises(ValueError):
        AdamWState(**kw)


def test_missing_grad_is_contract_error():
    a, b = param([1.0]), param([2.0])
    a.grad = np.ones(1)
    with pytest.raises(ContractError):
        adamw_step([a, b], AdamWState())


class _Net(Module):
    def __init__(self):
        rng = np.random.default_rng(0)
        self.layers = [Linear(3, 4, rng), Linear(4, 2, rng)]
        self.scale = param(np.ones(2))


def test_named_parameters_are_stable():
    names = [n for n, _ in _Net().named_parameters()]
    assert names == ["layers.0.weight", "layers.0.bias", "layers.1.weight", "layers.1.bias", "scale"]


def test_checkpoint_roundtrip(tmp_path):
    net = _Net()
    save_tensors(tmp_path / "ck", net.state_dict(), {"k": 1})
    state, meta = load_tensors(tmp_path / "ck")
    assert meta == {"k": 1}
    other = _Net()
    for p in other.parameters():
        p.data[...] = 0
    other.load_state_dict(state)
    for (n1, p1), (n2, p2) in zip(net.named_parameters(), other.named_parameters()):
        assert n1 == n2 and p1.data.tobytes() == p2.data.tobytes()
    raw = (tmp_path / "ck.bin").read_bytes()
    assert len(raw) == 8 * sum(p.size for p in net.parameters())


def test_load_state_dict_strict():
    net = _Net()
    state = net.state_dict()
    state.pop("scale")
    with pytest.raises(KeyError):
        _Net().load_state_dict(state)
    bad = net.state_dict()
    bad["scale"] = np.ones(3)
    with pytest.raises(ValueError):
        _Net().load_state_dict(bad)


def test_linear_forward(rng):
    lin = Linear(3, 2, rng)
    x = rng.normal(size=(5, 3))
    np.testing.assert_allclose(lin(Tensor(x)).data, x @ lin.weight.data + lin.bias.data)
