"""
Unit tests for prompt_ttt.core.trainer.

Covers:
- Box and point prompt derivation from masks
- Instance indexing and sample construction
- Saturation-triggered learning-rate drops
- fit: history bookkeeping, determinism, zero-epoch identity, non-finite loss
- Gradient oracle: autograd against central differences
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
import torch

from prompt_ttt.constants import VALID_COMPONENTS
from prompt_ttt.core import trainer as T
from prompt_ttt.core.model import ModelParams, init_params, param_digest
from prompt_ttt.exceptions import ConfigurationError, OracleError, SamplingError, TrainingError
from prompt_ttt.types import ArchConfig, TrainConfig, VideoSequence

# ---------------------------------------------------------------------
# box_from_mask
# ---------------------------------------------------------------------


def test_box_from_mask_uses_pixel_edges() -> None:
    mask = np.zeros((16, 16), dtype=np.uint8)
    mask[3:7, 5:12] = 1
    box = T.box_from_mask(mask)
    assert (box.x_min, box.y_min, box.x_max, box.y_max) == (5.0, 3.0, 12.0, 7.0)


def test_box_from_mask_single_pixel() -> None:
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[7, 7] = 1
    box = T.box_from_mask(mask)
    assert (box.x_min, box.y_min, box.x_max, box.y_max) == (7.0, 7.0, 8.0, 8.0)


def test_box_jitter_stays_inside_image() -> None:
    mask = np.zeros((32, 32), dtype=np.uint8)
    mask[0:10, 20:32] = 1
    rng = np.random.default_rng(0)
    for _ in range(50):
        box = T.box_from_mask(mask, jitter=0.1, rng=rng)
        assert 0.0 <= box.x_min < box.x_max <= 32.0
        assert 0.0 <= box.y_min < box.y_max <= 32.0


def test_box_from_empty_mask_fails() -> None:
    with pytest.raises(SamplingError, match="empty mask"):
        T.box_from_mask(np.zeros((8, 8), dtype=np.uint8))


# ---------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------


def test_instance_index_covers_present_anatomies(tiny_video: VideoSequence) -> None:
    index = T.build_instance_index([tiny_video])
    assert len(index) == int(tiny_video.present.sum())
    for v, frame, code in index:
        assert v == 0
        assert tiny_video.anatomy_mask(frame, code).any()


def test_make_sample_prompts_lie_on_mask(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig
) -> None:
    rng = np.random.default_rng(1)
    for frame, code in [(0, 2), (1, 2), (2, 2)]:
        sample = T.make_sample(tiny_video, frame, code, tiny_train_config, rng)
        assert sample.image.shape == (64, 64)
        assert sample.gt.any()
        assert sample.gt[int(sample.point.y), int(sample.point.x)] == 1
        assert sample.source == f"video_000/{frame}/{code}"


def test_make_sample_without_augmentation_keeps_frame(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig
) -> None:
    config = replace(tiny_train_config, augment=False, box_jitter=0.0)
    sample = T.make_sample(tiny_video, 0, 2, config, np.random.default_rng(0))
    assert np.array_equal(sample.image.numpy(), tiny_video.frames[0])
    assert np.array_equal(sample.gt, tiny_video.anatomy_mask(0, 2))
    assert sample.box == T.box_from_mask(tiny_video.anatomy_mask(0, 2))


# ---------------------------------------------------------------------
# update_lr_on_saturation
# ---------------------------------------------------------------------


def _opt(lr: float = 1.0) -> T.OptimizerState:
    return T.make_optimizer([torch.nn.Parameter(torch.zeros(1))], lr)


def test_lr_drops_after_patience() -> None:
    config = TrainConfig(saturation_patience=2, lr_drop_factor=0.5, saturation_tolerance=0.0)
    opt = _opt()
    losses: list[float] = []
    for value in [1.0, 1.0, 1.0]:
        losses.append(value)
        T.update_lr_on_saturation(losses, opt, config)
    assert opt.learning_rate == 0.5
    assert opt.optimizer.param_groups[0]["lr"] == 0.5
    assert opt.stale_count == 0


def test_lr_kept_while_improving() -> None:
    config = TrainConfig(saturation_patience=2, lr_drop_factor=0.5, saturation_tolerance=1e-3)
    opt = _opt()
    losses: list[float] = []
    for value in [1.0, 0.9, 0.8, 0.7, 0.6]:
        losses.append(value)
        T.update_lr_on_saturation(losses, opt, config)
    assert opt.learning_rate == 1.0
    assert opt.best_loss == 0.6


def test_lr_tolerance_counts_tiny_gains_as_stale() -> None:
    config = TrainConfig(saturation_patience=1, lr_drop_factor=0.5, saturation_tolerance=0.1)
    opt = _opt()
    T.update_lr_on_saturation([1.0], opt, config)
    T.update_lr_on_saturation([1.0, 0.95], opt, config)
    assert opt.learning_rate == 0.5


def test_two_saturation_windows_compound() -> None:
    config = TrainConfig(saturation_patience=2, lr_drop_factor=0.8, saturation_tolerance=0.0)
    opt = _opt()
    losses: list[float] = []
    for _ in range(5):
        losses.append(1.0)
        T.update_lr_on_saturation(losses, opt, config)
    assert opt.learning_rate == pytest.approx(0.64)


def test_lr_update_ignores_empty_history() -> None:
    opt = _opt()
    T.update_lr_on_saturation([], opt, TrainConfig())
    assert opt.best_loss is None


# ---------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------


def test_fit_records_history(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_arch: ArchConfig
) -> None:
    _, history = T.fit([tiny_video], tiny_train_config, tiny_arch)
    assert len(history.train_loss) == tiny_train_config.epochs
    assert len(history.main_loss) == len(history.aux_loss) == tiny_train_config.epochs
    assert all(np.isfinite(history.train_loss))
    for total, main, aux in zip(
        history.train_loss, history.main_loss, history.aux_loss, strict=True
    ):
        assert total == pytest.approx(main + tiny_train_config.lambda_aux * aux, rel=1e-5)
    assert history.learning_rates == sorted(history.learning_rates, reverse=True)
    assert history.opt_state is not None
    assert history.opt_state.step == 2 * (8 // 2)


def test_fit_is_deterministic(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_arch: ArchConfig
) -> None:
    a, history_a = T.fit([tiny_video], tiny_train_config, tiny_arch)
    b, history_b = T.fit([tiny_video], tiny_train_config, tiny_arch)
    assert history_a.train_loss == history_b.train_loss
    for component in VALID_COMPONENTS:
        assert param_digest(a, component) == param_digest(b, component)


def test_fit_updates_source_components(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_arch: ArchConfig
) -> None:
    init = init_params(tiny_train_config.seed, tiny_arch)
    trained, _ = T.fit([tiny_video], tiny_train_config, tiny_arch)
    for component in T.SOURCE_COMPONENTS:
        assert param_digest(trained, component) != param_digest(init, component)


def test_fit_zero_epochs_returns_init(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_arch: ArchConfig
) -> None:
    config = replace(tiny_train_config, epochs=0)
    params, history = T.fit([tiny_video], config, tiny_arch)
    init = init_params(config.seed, tiny_arch)
    assert history.train_loss == []
    for component in VALID_COMPONENTS:
        assert param_digest(params, component) == param_digest(init, component)


def test_fit_decreases_training_loss(tiny_video: VideoSequence, tiny_arch: ArchConfig) -> None:
    config = TrainConfig(
        epochs=5,
        samples_per_epoch=0,
        batch_size=2,
        augment=False,
        box_jitter=0.0,
        pretrain_baseline_heads=False,
    )
    _, history = T.fit([tiny_video], config, tiny_arch)
    assert history.train_loss[-1] < history.train_loss[0]


def test_fit_rejects_empty_dataset(tiny_train_config: TrainConfig, tiny_arch: ArchConfig) -> None:
    with pytest.raises(ConfigurationError, match="no annotated instances"):
        T.fit([], tiny_train_config, tiny_arch)


def test_fit_calls_epoch_callback(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_arch: ArchConfig
) -> None:
    seen: list[int] = []
    T.fit([tiny_video], tiny_train_config, tiny_arch, on_epoch_end=lambda e, _h: seen.append(e))
    assert seen == [0, 1]


def test_train_step_rejects_nonfinite_loss(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_params: ModelParams
) -> None:
    config = replace(tiny_train_config, augment=False, pretrain_baseline_heads=False)
    broken = replace(tiny_video, frames=np.full_like(tiny_video.frames, np.nan))
    sample = T.make_sample(broken, 0, 2, config, np.random.default_rng(0))
    opt = T.create_optimizer_state(tiny_params, config)
    with pytest.raises(TrainingError, match="video_000/0/2"):
        T.train_step([sample], tiny_params, opt, config)


def test_train_step_with_zero_lr_keeps_params(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_params: ModelParams
) -> None:
    config = replace(tiny_train_config, learning_rate=0.0)
    before = {name: t.clone() for name, t in tiny_params.state_dict().items()}
    batch = [T.make_sample(tiny_video, f, 2, config, np.random.default_rng(f)) for f in range(2)]
    opt = T.create_optimizer_state(tiny_params, config)
    T.train_step(batch, tiny_params, opt, config)
    assert opt.step == 1
    for name, tensor in tiny_params.state_dict().items():
        assert torch.equal(tensor, before[name]), name


def test_train_step_rejects_empty_batch(
    tiny_train_config: TrainConfig, tiny_params: ModelParams
) -> None:
    opt = T.create_optimizer_state(tiny_params, tiny_train_config)
    with pytest.raises(ConfigurationError, match="empty"):
        T.train_step([], tiny_params, opt, tiny_train_config)


# ---------------------------------------------------------------------
# Gradient oracle
# ---------------------------------------------------------------------


def _batch_evaluator(video: VideoSequence, config: TrainConfig):  # type: ignore[no-untyped-def]
    batch = [
        T.make_sample(video, frame, 2, config, np.random.default_rng(frame))
        for frame in range(2)
    ]

    def _evaluate(model: torch.nn.Module) -> torch.Tensor:
        total, _, _ = T.batch_losses(model, batch, config)  # type: ignore[arg-type]
        return total.value

    return _evaluate


def test_gradient_check_matches_finite_differences(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_params: ModelParams
) -> None:
    """
    L_train (lambda 0.2) in double precision on 100 random coordinates.

    Relative error is taken against max(|analytic|, |numeric|, FD_RELATIVE_FLOOR),
    so coordinates with near-zero gradients are compared absolutely.
    """
    config = replace(tiny_train_config, lambda_aux=0.2)
    evaluator = _batch_evaluator(tiny_video, config)
    result = T.gradient_check(evaluator, tiny_params, n_coords=100, epsilon=1e-6, seed=3)
    assert len(result.indices) == 100
    assert result.max_relative_error < 1e-5


def test_gradient_check_leaves_params_untouched(
    tiny_video: VideoSequence, tiny_train_config: TrainConfig, tiny_params: ModelParams
) -> None:
    before = {c: param_digest(tiny_params, c) for c in VALID_COMPONENTS}
    evaluator = _batch_evaluator(tiny_video, tiny_train_config)
    T.gradient_check(evaluator, tiny_params, n_coords=3, seed=0)
    assert {c: param_digest(tiny_params, c) for c in VALID_COMPONENTS} == before
    assert next(tiny_params.parameters()).dtype == torch.float32


def test_sample_coordinates_are_seeded(tiny_params: ModelParams) -> None:
    a = T.sample_coordinates(tiny_params, 10, seed=4)
    assert a == T.sample_coordinates(tiny_params, 10, seed=4)
    assert len(set(a)) == 10
    named = dict(tiny_params.named_parameters())
    assert all(0 <= flat < named[name].numel() for name, flat in a)


def test_finite_difference_rejects_zero_epsilon(tiny_params: ModelParams) -> None:
    with pytest.raises(OracleError, match="epsilon"):
        T.finite_difference_gradient(
            lambda m: sum(p.sum() for p in m.parameters()),  # type: ignore[misc]
            tiny_params,
            [("encoder.proj.bias", 0)],
            0.0,
        )


def test_finite_difference_rejects_bad_coordinate(tiny_params: ModelParams) -> None:
    with pytest.raises(OracleError, match="Invalid parameter coordinate"):
        T.finite_difference_gradient(
            lambda m: torch.tensor(0.0), tiny_params, [("no.such.param", 0)], 1e-6
        )


def test_finite_difference_on_quadratic() -> None:
    model = torch.nn.Linear(2, 1, bias=False)
    with torch.no_grad():
        model.weight.copy_(torch.tensor([[1.5, -2.0]]))
    estimates = T.finite_difference_gradient(
        lambda m: (m.weight**2).sum(), model, [("weight", 0), ("weight", 1)], 1e-4
    )
    assert estimates == pytest.approx([3.0, -4.0], abs=1e-8)
