import math

import numpy as np
import pytest
import torch

from pip_forecast.batching import collate, spline_plan, truth_plan
from pip_forecast.errors import ContractViolation
from pip_forecast.grid import cell_index
from pip_forecast.network import (PipNet, TargetFusion, bivariate_log_density,
                                  config_from_preset, integrate_displacements, nll_loss,
                                  to_predictions)
from pip_forecast.scenes import (ManeuverLabel, NeighborEntry, SceneSample, TargetEntry,
                                 TrajectorySegment)

torch.manual_seed(0)


def straight(vehicle_id, pos, speed, n, t0):
    t = 0.2 * np.arange(n)
    pts = np.asarray(pos, float) + np.outer(t, [speed, 0.0])
    return TrajectorySegment(vehicle_id, pts, t0)


def scene_with(target_offsets, neighbor_offsets=(), speed=15.0, ego_pos=(100.0, 5.0)):
    """Hand-built scene: straight ego plus targets/neighbors at given offsets at t."""
    ego_pos = np.asarray(ego_pos, float)
    hist_start = ego_pos - np.array([speed * 3.0, 0.0])
    ego_hist = straight(1, hist_start, speed, 16, 0)
    ego_plan = straight(1, ego_pos + [speed * 0.2, 0], speed, 25, 16)
    targets = []
    for k, off in enumerate(target_offsets):
        tgt_pos = ego_pos + np.asarray(off, float)
        cell = cell_index(tgt_pos - ego_pos)
        assert cell is not None, f"fixture target {off} outside the target area"
        neighbors = []
        ecell = cell_index(ego_pos - tgt_pos)
        if ecell is not None:
            neighbors.append(NeighborEntry(1, straight(1, hist_start, speed, 16, 0), ecell))
        for j, noff in enumerate(neighbor_offsets):
            nbr_pos = tgt_pos + np.asarray(noff, float)
            ncell = cell_index(nbr_pos - tgt_pos)
            if ncell is None:
                continue
            nid = 100 + 10 * k + j
            neighbors.append(NeighborEntry(
                nid, straight(nid, nbr_pos - [speed * 3.0, 0], speed, 16, 0), ncell))
        vid = 2 + k
        targets.append(TargetEntry(
            vehicle_id=vid,
            history=straight(vid, tgt_pos - [speed * 3.0, 0], speed, 16, 0),
            future=straight(vid, tgt_pos + [speed * 0.2, 0], speed, 25, 16),
            label=ManeuverLabel("keep", "normal"),
            cell=cell,
            neighbors=neighbors))
    return SceneSample(recording_id="fixture", frame=15, ego_id=1,
                       ego_history=ego_hist, ego_plan=ego_plan, targets=targets,
                       reference_pose=ego_pos)


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(7)
    return PipNet(config_from_preset("desk")).eval()


# --- embedding and encoders ----------------------------------------------------

def test_embed_preserves_length(model):
    for steps in (16, 25):
        x = torch.randn(3, steps, 2)
        assert model.embed_trajectory(x).shape == (3, steps, model.cfg.embed_dim)


def test_embed_rejects_short_sequences(model):
    with pytest.raises(ContractViolation):
        model.embed_trajectory(torch.randn(1, 2, 2))


def test_embed_deterministic(model):
    x = torch.randn(2, 16, 2)
    assert torch.equal(model.embed_trajectory(x), model.embed_trajectory(x))


def test_encoders_output_shapes(model):
    h = model.encode_history(torch.randn(4, 16, 2))
    p = model.encode_planning(torch.randn(4, 25, 2))
    assert h.shape == (4, model.cfg.enc_dim)
    assert p.shape == (4, model.cfg.enc_dim)


def test_encoders_reject_wrong_lengths(model):
    with pytest.raises(ContractViolation):
        model.encode_history(torch.randn(1, 25, 2))
    with pytest.raises(ContractViolation):
        model.encode_planning(torch.randn(1, 16, 2))


def test_planning_encoder_is_order_sensitive(model):
    seq = torch.randn(1, 25, 2)
    a = model.encode_planning(seq)
    b = model.encode_planning(seq.flip(1))
    assert not torch.allclose(a, b)


def test_encoders_do_not_share_parameters(model):
    hist = {id(p) for p in model.enc_hist.parameters()}
    plan = {id(p) for p in model.enc_plan.parameters()}
    assert hist.isdisjoint(plan)


def test_encoding_deterministic(model):
    x = torch.randn(2, 25, 2)
    assert torch.equal(model.encode_planning(x), model.encode_planning(x))


# --- planning-coupled target encoding --------------------------------------------

def test_target_encoding_depends_on_plan(model):
    sample = scene_with([(8.0, 0.0)])
    rng = np.random.default_rng(3)
    plan_a = sample.reference_pose + np.cumsum(rng.uniform(0.5, 2.0, (25, 2)), axis=0)
    plan_b = sample.reference_pose + np.cumsum(rng.uniform(0.5, 2.0, (25, 2)), axis=0)
    ta = model.encode_targets(collate([sample], plan_source=lambda s: plan_a))
    tb = model.encode_targets(collate([sample], plan_source=lambda s: plan_b))
    assert not torch.allclose(ta, tb)


def test_target_encoding_ignores_plan_when_ablated():
    torch.manual_seed(7)
    noplan = PipNet(config_from_preset("desk", no_plan=True)).eval()
    sample = scene_with([(8.0, 0.0)])
    plan_a = sample.reference_pose + np.tile([2.0, 0.0], (25, 1)).cumsum(axis=0)
    plan_b = sample.reference_pose + np.tile([1.0, 0.5], (25, 1)).cumsum(axis=0)
    ta = noplan.encode_targets(collate([sample], plan_source=lambda s: plan_a))
    tb = noplan.encode_targets(collate([sample], plan_source=lambda s: plan_b))
    assert torch.equal(ta, tb)


def test_degenerate_occupancy_is_finite(model):
    # ego out of the target's area and no neighbors: both social tensors are
    # all-zero, which is allowed and must still produce finite output
    batch = collate([scene_with([(8.0, 0.0)])])
    batch.plan_valid[:] = False
    batch.hist = batch.hist[:batch.n_targets]
    batch.nbr_slot = batch.nbr_slot[:0]
    batch.nbr_cell = batch.nbr_cell[:0]
    out = model(batch, maneuvers="all")
    for field in (out.joint, out.delta, out.sigma, out.rho):
        assert torch.isfinite(field).all()


def test_corner_targets_finite(model):
    sample = scene_with([(-30.4, -5.3), (30.3, 5.3)])
    out = model(collate([sample]), maneuvers="all")
    assert torch.isfinite(out.delta).all()


# --- target fusion -----------------------------------------------------------------

def test_fusion_preserves_spatial_shape(model):
    x = torch.randn(2, model.cfg.target_dim, 25, 5)
    y = model.fuse_targets(x)
    assert y.shape == (2, model.cfg.fused_dim, 25, 5)


def test_fusion_zero_input_finite(model):
    y = model.fuse_targets(torch.zeros(1, model.cfg.target_dim, 25, 5))
    assert torch.isfinite(y).all()


def test_fusion_rejects_wrong_shape(model):
    with pytest.raises(ContractViolation):
        model.fuse_targets(torch.zeros(1, model.cfg.target_dim, 13, 5))


def test_fusion_couples_nearby_cells():
    torch.manual_seed(1)
    fusion = TargetFusion(8, 8, 16, 8).eval()
    base = torch.zeros(1, 8, 25, 5)
    base[0, :, 12, 2] = torch.randn(8)
    base[0, :, 14, 2] = torch.randn(8)
    bumped = base.clone()
    bumped[0, :, 12, 2] += 0.5
    with torch.no_grad():
        delta = (fusion(bumped) - fusion(base))[0, :, 14, 2]
    assert delta.abs().max() > 1e-6


def test_no_fusion_is_projection_of_own_encoding():
    torch.manual_seed(7)
    nofusion = PipNet(config_from_preset("desk", no_fusion=True)).eval()
    sample = scene_with([(10.0, 0.0), (-12.0, 2.0)])
    batch = collate([sample])
    t = nofusion.encode_targets(batch)
    fused = nofusion.fused_encodings(batch, t)
    assert torch.allclose(fused, nofusion.fusion_proj(t))


# --- maneuver decoding ----------------------------------------------------------

def test_maneuver_heads_are_normalized(model):
    fused = torch.randn(10, model.cfg.fused_dim)
    lat, lon, joint = model.maneuver_probs(fused)
    assert torch.allclose(lat.sum(1), torch.ones(10), atol=1e-6)
    assert torch.allclose(lon.sum(1), torch.ones(10), atol=1e-6)
    assert torch.allclose(joint.sum(1), torch.ones(10), atol=1e-6)


def test_joint_is_product_of_heads(model):
    fused = torch.randn(4, model.cfg.fused_dim)
    lat, lon, joint = model.maneuver_probs(fused)
    for a in range(3):
        for b in range(2):
            assert torch.allclose(joint[:, 2 * a + b], lat[:, a] * lon[:, b])


def test_joint_product_hand_example():
    lat = torch.tensor([[0.5, 0.3, 0.2]], dtype=torch.float64)
    lon = torch.tensor([[0.6, 0.4]], dtype=torch.float64)
    joint = (lat.unsqueeze(-1) * lon.unsqueeze(-2)).flatten(-2)
    assert joint.sum().item() == pytest.approx(1.0, abs=1e-9)
    assert joint.max().item() == pytest.approx(0.30, abs=1e-9)
    # slot layout follows the maneuver index: 2*lateral + longitudinal
    assert joint[0, ManeuverLabel("keep", "normal").position].item() == pytest.approx(0.30)


def test_uniform_heads_give_uniform_joint():
    lat = torch.full((1, 3), 1 / 3)
    lon = torch.full((1, 2), 1 / 2)
    joint = (lat.unsqueeze(-1) * lon.unsqueeze(-2)).flatten(-2)
    assert torch.allclose(joint, torch.full((1, 6), 1 / 6))


def test_decoder_output_ranges(model):
    fused = torch.randn(5, model.cfg.fused_dim)
    man = torch.arange(6).expand(5, -1)
    delta, sigma, rho = model.decode_trajectory(fused, man)
    assert delta.shape == (5, 6, 25, 2)
    assert (sigma > 0).all()
    assert (rho.abs() < 1).all()


def test_decoder_maneuver_sensitivity(model):
    fused = torch.randn(1, model.cfg.fused_dim)
    delta, _, _ = model.decode_trajectory(fused, torch.tensor([[0, 3]]))
    assert not torch.allclose(delta[0, 0], delta[0, 1])


def test_decoder_deterministic(model):
    fused = torch.randn(2, model.cfg.fused_dim)
    man = torch.arange(6).expand(2, -1)
    a = model.decode_trajectory(fused, man)
    b = model.decode_trajectory(fused, man)
    for x, y in zip(a, b):
        assert torch.equal(x, y)


# --- displacement integration ------------------------------------------------------

def test_integrate_hand_example():
    mu = integrate_displacements(np.array([10.0, 2.0]),
                                 np.array([[1.0, 0.0], [1.0, 0.1]]))
    assert np.allclose(mu, [[11.0, 2.0], [12.0, 2.1]])


def test_integrate_zero_deltas():
    mu = integrate_displacements(np.array([3.0, -4.0]), np.zeros((25, 2)))
    assert np.allclose(mu, [3.0, -4.0])


def test_integrate_telescoping(rng):
    deltas = rng.normal(size=(25, 2))
    mu = integrate_displacements(np.zeros(2), deltas)
    assert np.allclose(np.diff(mu, axis=0), deltas[1:], atol=1e-12)
    assert np.allclose(mu[0], deltas[0])


def test_integrate_torch_matches_numpy(rng):
    deltas = rng.normal(size=(3, 25, 2))
    last = rng.normal(size=(3, 2))
    a = integrate_displacements(last, deltas)
    b = integrate_displacements(torch.as_tensor(last), torch.as_tensor(deltas)).numpy()
    assert np.allclose(a, b)


# --- likelihood ------------------------------------------------------------------

def test_nll_identity_at_truth():
    delta = torch.tensor([[[1.0, 2.0]]])
    sigma = torch.ones(1, 1, 2)
    rho = torch.zeros(1, 1)
    probs = torch.tensor([[1.0, 0, 0, 0, 0, 0]])
    truth = torch.tensor([[[1.0, 2.0]]])       # truth == mu
    loss = nll_loss(delta, sigma, rho, probs, torch.tensor([0]), truth)
    assert loss.item() == pytest.approx(math.log(2 * math.pi), abs=1e-6)


def test_nll_doubling_sigma_adds_log4():
    delta = torch.tensor([[[0.5, -0.25]]])
    probs = torch.tensor([[1.0, 0, 0, 0, 0, 0]])
    truth = delta.clone()
    args = (torch.tensor([0]), truth)
    base = nll_loss(delta, torch.ones(1, 1, 2), torch.zeros(1, 1), probs, *args)
    wide = nll_loss(delta, 2 * torch.ones(1, 1, 2), torch.zeros(1, 1), probs, *args)
    assert (wide - base).item() == pytest.approx(math.log(4.0), abs=1e-6)


def test_nll_zero_targets_is_zero():
    loss = nll_loss(torch.zeros(0, 25, 2), torch.zeros(0, 25, 2), torch.zeros(0, 25),
                    torch.zeros(0, 6), torch.zeros(0, dtype=torch.long),
                    torch.zeros(0, 25, 2))
    assert loss.item() == 0.0


def test_nll_rejects_bad_parameters():
    probs = torch.full((1, 6), 1 / 6)
    with pytest.raises(ContractViolation):
        nll_loss(torch.zeros(1, 1, 2), torch.zeros(1, 1, 2), torch.zeros(1, 1),
                 probs, torch.tensor([0]), torch.zeros(1, 1, 2))
    with pytest.raises(ContractViolation):
        nll_loss(torch.zeros(1, 1, 2), torch.ones(1, 1, 2), torch.ones(1, 1),
                 probs, torch.tensor([0]), torch.zeros(1, 1, 2))


def test_density_maneuver_term():
    # P(m_true) = 0.5 adds exactly log 2 over the P = 1 case
    delta = torch.tensor([[[1.0, 1.0]]])
    sigma = torch.ones(1, 1, 2)
    rho = torch.zeros(1, 1)
    truth = delta.clone()
    half = torch.tensor([[0.5, 0.5, 0, 0, 0, 0]])
    one = torch.tensor([[1.0, 0, 0, 0, 0, 0]])
    a = nll_loss(delta, sigma, rho, half, torch.tensor([0]), truth)
    b = nll_loss(delta, sigma, rho, one, torch.tensor([0]), truth)
    assert (a - b).item() == pytest.approx(math.log(2.0), abs=1e-6)


def test_density_correlation_direction():
    # positive rho rewards errors aligned with the correlation
    mu = torch.zeros(1, 2)
    sigma = torch.ones(1, 2)
    y_aligned = torch.tensor([[1.0, 1.0]])
    y_against = torch.tensor([[1.0, -1.0]])
    rho = torch.tensor([0.8])
    assert bivariate_log_density(mu, sigma, rho, y_aligned) > \
        bivariate_log_density(mu, sigma, rho, y_against)


# --- forward composition ------------------------------------------------------------

def test_forward_shapes_three_targets(model):
    sample = scene_with([(8.0, 0.0), (-10.0, 3.7), (20.0, -3.7)])
    batch = collate([sample])
    out = model(batch, maneuvers="all")
    assert out.joint.shape == (3, 6)
    assert out.delta.shape == (3, 6, 25, 2)
    preds = to_predictions(batch, out)
    assert len(preds) == 1 and len(preds[0]) == 3
    for p in preds[0]:
        assert p.probs.shape == (6,)
        assert p.mu.shape == (6, 25, 2)


def test_forward_noplan_constant_over_plans():
    torch.manual_seed(7)
    noplan = PipNet(config_from_preset("desk", no_plan=True)).eval()
    sample = scene_with([(8.0, 0.0), (-6.0, -3.7)])
    rng = np.random.default_rng(0)
    outs = []
    for _ in range(10):
        plan = sample.reference_pose + np.cumsum(rng.uniform(-1, 3, (25, 2)), axis=0)
        batch = collate([sample], plan_source=lambda s: plan)
        with torch.no_grad():
            outs.append(noplan(batch, maneuvers="all"))
    for out in outs[1:]:
        assert torch.equal(out.joint, outs[0].joint)
        assert torch.equal(out.delta, outs[0].delta)
        assert torch.equal(out.sigma, outs[0].sigma)
        assert torch.equal(out.rho, outs[0].rho)


def test_forward_full_model_depends_on_plan(model):
    sample = scene_with([(8.0, 0.0)])
    rng = np.random.default_rng(5)
    plan_a = sample.reference_pose + np.cumsum(rng.uniform(0.5, 2, (25, 2)), axis=0)
    plan_b = sample.reference_pose + np.cumsum(rng.uniform(0.5, 2, (25, 2)), axis=0)
    with torch.no_grad():
        out_a = model(collate([sample], plan_source=lambda s: plan_a), maneuvers="all")
        out_b = model(collate([sample], plan_source=lambda s: plan_b), maneuvers="all")
    assert not torch.allclose(out_a.delta, out_b.delta)


def test_no_fusion_target_isolation():
    torch.manual_seed(7)
    nofusion = PipNet(config_from_preset("desk", no_fusion=True)).eval()
    base = scene_with([(28.0, 0.0), (-28.0, 0.0)])
    bumped = scene_with([(28.0, 0.0), (-28.0, 0.0)])
    bumped.targets[1].history.points[:, 1] += 0.5   # perturb the far target only
    # fixture precondition: the two targets are not in each other's areas
    assert all(n.vehicle_id == 1 for t in base.targets for n in t.neighbors)
    with torch.no_grad():
        out_a = nofusion(collate([base]), maneuvers="all")
        out_b = nofusion(collate([bumped]), maneuvers="all")
    assert torch.equal(out_a.delta[0], out_b.delta[0])
    assert torch.equal(out_a.joint[0], out_b.joint[0])
    assert not torch.allclose(out_a.delta[1], out_b.delta[1])


def test_forward_empty_batch(model):
    sample = scene_with([])
    out = model(collate([sample]), maneuvers="all")
    assert out.joint.shape == (0, 6)


def test_plan_sources_spline_interpolates_truth():
    sample = scene_with([(8.0, 0.0)])
    truth = truth_plan(sample)
    refit = spline_plan(sample)
    assert refit.shape == (25, 2)
    assert np.abs(refit[4::5] - truth[4::5]).max() < 1e-8   # 1 Hz knots preserved
