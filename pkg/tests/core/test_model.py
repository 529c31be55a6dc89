"""
Unit tests for prompt_ttt.core.model.

Covers:
- Deterministic initialization and seed sensitivity
- Shape/range contracts of encode_image, forward_main and forward_aux
- Input validation errors
- Prompt encoding determinism and point sensitivity
- param_digest soundness
"""

from __future__ import annotations

import pytest
import torch

from prompt_ttt.constants import VALID_COMPONENTS
from prompt_ttt.core.model import (
    ModelParams,
    encode_image,
    encode_prompt,
    forward_aux,
    forward_main,
    init_params,
    param_digest,
)
from prompt_ttt.exceptions import ConfigurationError, ShapeError, ValidationError
from prompt_ttt.types import ArchConfig, BoxPrompt, PointPrompt


def _image(size: int = 64, seed: int = 0) -> torch.Tensor:
    return torch.rand(size, size, generator=torch.Generator().manual_seed(seed))


# ---------------------------------------------------------------------
# init_params
# ---------------------------------------------------------------------


def test_init_params_is_deterministic(tiny_arch: ArchConfig) -> None:
    a, b = init_params(0, tiny_arch), init_params(0, tiny_arch)
    for component in VALID_COMPONENTS:
        assert param_digest(a, component) == param_digest(b, component)


def test_init_params_seed_sensitivity(tiny_arch: ArchConfig) -> None:
    a, b = init_params(0, tiny_arch), init_params(1, tiny_arch)
    assert param_digest(a, "encoder") != param_digest(b, "encoder")


def test_init_params_leaves_global_rng_untouched(tiny_arch: ArchConfig) -> None:
    torch.manual_seed(123)
    expected = torch.rand(3)
    torch.manual_seed(123)
    init_params(5, tiny_arch)
    assert torch.equal(torch.rand(3), expected)


def test_decoders_are_distinct(tiny_params: ModelParams) -> None:
    assert param_digest(tiny_params, "dseg") != param_digest(tiny_params, "daux")
    assert tiny_params.dseg.head.weight.data_ptr() != tiny_params.daux.head.weight.data_ptr()


def test_init_params_rejects_bad_arch() -> None:
    with pytest.raises(ConfigurationError):
        init_params(0, ArchConfig(embed_dim=0))


def test_all_params_finite(tiny_params: ModelParams) -> None:
    assert all(torch.isfinite(p).all() for p in tiny_params.parameters())


# ---------------------------------------------------------------------
# encode_image
# ---------------------------------------------------------------------


def test_encode_image_shape_default_arch() -> None:
    params = init_params(0)
    features = encode_image(torch.rand(256, 256), params)
    assert features.shape == (64, 16, 16)


def test_encode_image_is_deterministic(tiny_params: ModelParams) -> None:
    image = _image()
    assert torch.equal(encode_image(image, tiny_params), encode_image(image, tiny_params))


@pytest.mark.parametrize(
    ("image", "error"),
    [
        (torch.rand(60, 64), ShapeError),
        (torch.rand(1, 64, 64), ShapeError),
        (torch.full((64, 64), float("nan")), ValidationError),
        (torch.full((64, 64), 1.5), ValidationError),
    ],
)
def test_encode_image_invalid(
    tiny_params: ModelParams, image: torch.Tensor, error: type[Exception]
) -> None:
    with pytest.raises(error):
        encode_image(image, tiny_params)


# ---------------------------------------------------------------------
# encode_prompt
# ---------------------------------------------------------------------


def test_encode_point_is_deterministic(tiny_params: ModelParams) -> None:
    a = encode_prompt(PointPrompt(10, 20), tiny_params, (64, 64))
    b = encode_prompt(PointPrompt(10, 20), tiny_params, (64, 64))
    assert a.kind == "point"
    assert a.n_tokens == 1
    assert a.tokens.shape == (1, 16)
    assert torch.equal(a.tokens, b.tokens)


def test_encode_box_has_two_corner_tokens(tiny_params: ModelParams) -> None:
    embedding = encode_prompt(BoxPrompt(4, 4, 40, 30), tiny_params, (64, 64))
    assert embedding.kind == "box"
    assert embedding.tokens.shape == (2, 16)


def test_encode_prompt_validation(tiny_params: ModelParams) -> None:
    with pytest.raises(ValidationError):
        encode_prompt(BoxPrompt(10, 0, 10, 5), tiny_params, (64, 64))
    with pytest.raises(ValidationError):
        encode_prompt(PointPrompt(64, 0), tiny_params, (64, 64))


def test_point_encoding_injective_on_grid(tiny_params: ModelParams) -> None:
    tokens = {
        tuple(encode_prompt(PointPrompt(x, y), tiny_params, (64, 64)).tokens.flatten().tolist())
        for x in range(0, 64, 4)
        for y in range(0, 64, 4)
    }
    assert len(tokens) == 16 * 16


# ---------------------------------------------------------------------
# forward_main / forward_aux
# ---------------------------------------------------------------------


def test_forward_main_shape_and_range(tiny_params: ModelParams) -> None:
    prob = forward_main(_image(), BoxPrompt(8, 8, 40, 48), tiny_params)
    assert prob.shape == (64, 64)
    assert bool(((prob > 0) & (prob < 1)).all())


def test_forward_main_is_deterministic(tiny_params: ModelParams) -> None:
    image, box = _image(), BoxPrompt(0, 0, 64, 64)
    assert torch.equal(forward_main(image, box, tiny_params), forward_main(image, box, tiny_params))


def test_forward_main_not_saturated_at_init() -> None:
    prob = forward_main(torch.full((256, 256), 0.5), BoxPrompt(64, 64, 192, 192), init_params(0))
    assert 0.05 < float(prob.mean()) < 0.95


def test_forward_main_rejects_bad_box(tiny_params: ModelParams) -> None:
    with pytest.raises(ValidationError):
        forward_main(_image(), BoxPrompt(30, 10, 20, 40), tiny_params)


def test_forward_aux_shape_and_corner_point(tiny_params: ModelParams) -> None:
    prob = forward_aux(_image(), PointPrompt(0, 0), tiny_params)
    assert prob.shape == (64, 64)
    assert bool(((prob > 0) & (prob < 1)).all())


def test_forward_aux_point_conditioning_is_live(tiny_params: ModelParams) -> None:
    image = _image()
    a = forward_aux(image, PointPrompt(5, 5), tiny_params)
    b = forward_aux(image, PointPrompt(50, 40), tiny_params)
    assert float((a - b).abs().max()) > 0


def test_forward_aux_multiple_points(tiny_params: ModelParams) -> None:
    prob = forward_aux(_image(), [PointPrompt(5, 5), PointPrompt(30, 30)], tiny_params)
    assert prob.shape == (64, 64)
    with pytest.raises(ValidationError, match="At least one"):
        forward_aux(_image(), [], tiny_params)


# ---------------------------------------------------------------------
# param_digest
# ---------------------------------------------------------------------


def test_param_digest_unknown_component(tiny_params: ModelParams) -> None:
    with pytest.raises(ValidationError, match="Unknown component"):
        param_digest(tiny_params, "decoder_typo")


def test_param_digest_single_element_perturbation(tiny_arch: ArchConfig) -> None:
    params = init_params(0, tiny_arch)
    before = {c: param_digest(params, c) for c in VALID_COMPONENTS}
    with torch.no_grad():
        params.encoder.proj.bias[0] += 1e-6
    after = {c: param_digest(params, c) for c in VALID_COMPONENTS}
    assert after["encoder"] != before["encoder"]
    assert all(after[c] == before[c] for c in VALID_COMPONENTS if c != "encoder")


def test_param_digest_changes_after_gradient_step(tiny_params: ModelParams) -> None:
    before = param_digest(tiny_params, "encoder")
    dseg_before = param_digest(tiny_params, "dseg")
    opt = torch.optim.SGD(tiny_params.encoder.parameters(), lr=0.1)
    forward_main(_image(), BoxPrompt(8, 8, 40, 40), tiny_params).mean().backward()
    opt.step()
    assert param_digest(tiny_params, "encoder") != before
    assert param_digest(tiny_params, "dseg") == dseg_before
