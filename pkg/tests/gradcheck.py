"""Central finite differences used as the oracle for gradient tests."""

import torch


def numeric_grad(f, tensor: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """d f / d tensor element-wise via central differences; f returns a scalar."""
    grad = torch.zeros_like(tensor)
    flat = tensor.view(-1)
    gflat = grad.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        hi = float(f())
        flat[i] = orig - eps
        lo = float(f())
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    denom = max(analytic.norm().item(), numeric.norm().item(), 1e-12)
    return (analytic - numeric).norm().item() / denom


def check_grads_against_fd(loss_fn, tensors: dict[str, torch.Tensor], tol: float = 1e-4):
    """Assert autograd gradients match finite differences for every tensor.

    ``loss_fn`` must be a zero-argument callable evaluating the scalar loss
    from the current tensor values. All tensors must be float64 leaves.
    """
    for t in tensors.values():
        assert t.dtype == torch.float64, "gradient checks run in float64"
        t.grad = None
    loss = loss_fn()
    loss.backward()
    errors = {}
    for name, t in tensors.items():
        assert t.grad is not None, f"no gradient reached {name}"
        with torch.no_grad():
            num = numeric_grad(lambda: loss_fn().detach(), t)
        errors[name] = relative_error(t.grad, num)
    bad = {n: e for n, e in errors.items() if e >= tol}
    assert not bad, f"gradient mismatch beyond {tol}: {bad}"
    return errors
