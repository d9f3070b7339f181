//! Binary model container (`BLSM`). The layout is documented in
//! `docs/model-format.md`; every integer and real is little-endian.

use std::path::Path;

use crate::bls::{
    BlsModel, EnhancementActivation, EnhancementBank, EnhancementGroup, FeatureActivation, FeatureBank, FeatureWindow,
    HyperParams, Stage, Standardizer,
};
use crate::data::write_atomic;
use crate::error::{BlsError, Result};
use crate::frontend::{BiasPlacement, ConnectionLayer, RbfKind};
use crate::linalg::{self, Matrix, PinvState};
use crate::pipeline::Pipeline;

pub const MODEL_MAGIC: &[u8; 4] = b"BLSM";
pub const FORMAT_VERSION: u16 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| BlsError::value(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn matrix(&mut self, m: &Matrix) -> Result<()> {
        self.u32(m.nrows())?;
        self.u32(m.ncols())?;
        for v in linalg::to_row_major(m) {
            self.f64(v);
        }
        Ok(())
    }
    fn row(&mut self, r: &[f64]) -> Result<()> {
        self.u32(1)?;
        self.u32(r.len())?;
        r.iter().for_each(|v| self.f64(*v));
        Ok(())
    }
}

fn feature_act_code(a: FeatureActivation) -> u8 {
    match a {
        FeatureActivation::Linear => 0,
        FeatureActivation::Tanh => 1,
        FeatureActivation::Sigmoid => 2,
    }
}

fn enhancement_act_code(a: EnhancementActivation) -> u8 {
    match a {
        EnhancementActivation::Tanh => 0,
        EnhancementActivation::Sigmoid => 1,
        EnhancementActivation::Relu => 2,
    }
}

pub fn encode_model(p: &Pipeline) -> Result<Vec<u8>> {
    let m = &p.bls;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MODEL_MAGIC);
    w.0.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

    let h = &m.hyper;
    w.u32(h.n1)?;
    w.u32(h.n2)?;
    w.u32(h.n3)?;
    w.f64(h.lambda);
    w.u8(feature_act_code(h.feature_activation));
    w.u8(enhancement_act_code(h.enhancement_activation));
    w.f64(h.shrink);
    w.u64(h.seed);

    w.u32(m.input_dim)?;
    w.u32(m.classes)?;
    w.u32(m.features.windows.len())?;
    w.u32(m.enhancements.groups.len())?;
    w.u32(m.stages.len())?;
    for s in &m.stages {
        w.u32(s.windows)?;
        w.u32(s.groups)?;
    }
    w.row(&m.standardizer.mean)?;
    w.row(&m.standardizer.scale)?;
    for win in &m.features.windows {
        w.matrix(&win.weights)?;
        w.row(&win.bias)?;
    }
    w.f64(m.enhancements.shrink);
    for g in &m.enhancements.groups {
        w.matrix(&g.weights)?;
        w.row(&g.bias)?;
    }
    w.matrix(&m.w_out)?;
    w.0.extend_from_slice(&m.data_digest);

    match &m.pinv_state {
        None => w.u8(0),
        Some(s) => {
            w.u8(1);
            w.matrix(&s.a)?;
            w.matrix(&s.a_pinv)?;
            w.matrix(&s.basis)?;
        }
    }
    match &p.connection {
        None => w.u8(0),
        Some(c) => {
            w.u8(1);
            w.matrix(&c.w_r)?;
            w.row(&c.b_r)?;
            w.row(&c.bn_mean)?;
            w.row(&c.bn_var)?;
            w.f64(c.bn_eps);
            w.u8(match c.rbf {
                RbfKind::Gaussian => 0,
                RbfKind::Laplacian => 1,
            });
            w.u8(match c.bias {
                BiasPlacement::Inside => 0,
                BiasPlacement::Shift => 1,
            });
            w.u8(u8::from(c.fitted));
            match p.spatial {
                None => w.u8(0),
                Some((ht, wd)) => {
                    w.u8(1);
                    w.u32(ht)?;
                    w.u32(wd)?;
                }
            }
        }
    }
    Ok(w.0)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl std::fmt::Display) -> BlsError {
    BlsError::value(format!("corrupt model file: {msg}"))
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        let n = rows.checked_mul(cols).ok_or_else(|| corrupt("matrix size overflows"))?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| corrupt("matrix size overflows"))?)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let m = linalg::from_row_major(rows, cols, &data)?;
        linalg::ensure_finite(&m, "stored matrix")?;
        Ok(m)
    }
    fn row(&mut self, len: usize) -> Result<Vec<f64>> {
        let m = self.matrix()?;
        if m.nrows() != 1 || m.ncols() != len {
            return Err(corrupt(format!("expected a 1x{len} row, found {}x{}", m.nrows(), m.ncols())));
        }
        Ok(linalg::to_row_major(&m))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Pipeline> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(corrupt("bad magic, expected BLSM"));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let n1 = r.u32()?;
    let n2 = r.u32()?;
    let n3 = r.u32()?;
    let lambda = r.f64()?;
    let feature_activation = match r.u8()? {
        0 => FeatureActivation::Linear,
        1 => FeatureActivation::Tanh,
        2 => FeatureActivation::Sigmoid,
        c => return Err(corrupt(format!("unknown feature activation {c}"))),
    };
    let enhancement_activation = match r.u8()? {
        0 => EnhancementActivation::Tanh,
        1 => EnhancementActivation::Sigmoid,
        2 => EnhancementActivation::Relu,
        c => return Err(corrupt(format!("unknown enhancement activation {c}"))),
    };
    let shrink = r.f64()?;
    let seed = r.u64()?;
    let hyper = HyperParams {
        n1,
        n2,
        n3,
        lambda,
        feature_activation,
        enhancement_activation,
        shrink,
        seed,
    };
    hyper.validate()?;

    let input_dim = r.u32()?;
    let classes = r.u32()?;
    let n_windows = r.u32()?;
    let n_groups = r.u32()?;
    let n_stages = r.u32()?;
    let mut stages = Vec::new();
    for _ in 0..n_stages {
        stages.push(Stage {
            windows: r.u32()?,
            groups: r.u32()?,
        });
    }
    if stages.iter().map(|s| s.windows).sum::<usize>() != n_windows
        || stages.iter().map(|s| s.groups).sum::<usize>() != n_groups
    {
        return Err(corrupt("stage table disagrees with bank sizes"));
    }
    let standardizer = Standardizer {
        mean: r.row(input_dim)?,
        scale: r.row(input_dim)?,
    };
    let mut windows = Vec::new();
    for _ in 0..n_windows {
        let weights = r.matrix()?;
        if weights.nrows() != input_dim {
            return Err(corrupt("feature window fan-in differs from input width"));
        }
        let bias = r.row(weights.ncols())?;
        windows.push(FeatureWindow { weights, bias });
    }
    let bank_shrink = r.f64()?;
    let mut groups = Vec::new();
    for _ in 0..n_groups {
        let weights = r.matrix()?;
        let bias = r.row(weights.ncols())?;
        groups.push(EnhancementGroup { weights, bias });
    }
    let features = FeatureBank { windows };
    let enhancements = EnhancementBank {
        groups,
        shrink: bank_shrink,
    };
    let w_out = r.matrix()?;
    if w_out.nrows() != features.node_count() + enhancements.node_count() || w_out.ncols() != classes {
        return Err(corrupt("output weights do not match the node layout"));
    }
    let data_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    let pinv_state = match r.u8()? {
        0 => None,
        1 => {
            let a = r.matrix()?;
            let a_pinv = r.matrix()?;
            let basis = r.matrix()?;
            if a.ncols() != w_out.nrows() {
                return Err(corrupt("retained design matrix width differs from output weights"));
            }
            Some(PinvState::from_parts(a, a_pinv, basis)?)
        }
        f => return Err(corrupt(format!("invalid pseudoinverse flag {f}"))),
    };
    let (connection, spatial) = match r.u8()? {
        0 => (None, None),
        1 => {
            let w_r = r.matrix()?;
            let units = w_r.ncols();
            let b_r = r.row(units)?;
            let bn_mean = r.row(units)?;
            let bn_var = r.row(units)?;
            let bn_eps = r.f64()?;
            let rbf = match r.u8()? {
                0 => RbfKind::Gaussian,
                1 => RbfKind::Laplacian,
                c => return Err(corrupt(format!("unknown rbf kind {c}"))),
            };
            let bias = match r.u8()? {
                0 => BiasPlacement::Inside,
                1 => BiasPlacement::Shift,
                c => return Err(corrupt(format!("unknown bias placement {c}"))),
            };
            let fitted = r.u8()? == 1;
            let spatial = match r.u8()? {
                0 => None,
                1 => Some((r.u32()?, r.u32()?)),
                f => return Err(corrupt(format!("invalid spatial flag {f}"))),
            };
            let layer = ConnectionLayer {
                w_r,
                b_r,
                bn_mean,
                bn_var,
                bn_eps,
                rbf,
                bias,
                fitted,
            };
            (Some(layer), spatial)
        }
        f => return Err(corrupt(format!("invalid connection flag {f}"))),
    };
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let bls = BlsModel {
        hyper,
        standardizer,
        features,
        enhancements,
        stages,
        w_out,
        pinv_state,
        classes,
        input_dim,
        data_digest,
    };
    Ok(Pipeline {
        connection,
        spatial,
        bls,
    })
}

pub fn save_model(path: impl AsRef<Path>, p: &Pipeline) -> Result<()> {
    write_atomic(path.as_ref(), &encode_model(p)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Pipeline> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| BlsError::io(path, e))?;
    decode_model(&bytes)
}
