//! Python bindings. Images and maps are passed as nested row lists (or
//! anything iterable the same way, such as 2-D NumPy arrays) and returned as
//! nested lists.

use metalseg::fusion::{plan_patches as plan, FusionConfig};
use metalseg::loss::{self, BettiMatchConfig, FiltrationType, GradientMap, LossConfig};
use metalseg::prompts::{foreground_seed_mask, sample_prompts as sample, PromptConfig};
use metalseg::synth::{generate, inject_defect_set, DefectKind, DefectSpec, SynthConfig};
use metalseg::{BinaryMask, Filtration, GrayImage, LikelihoodMap};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(metalseg, MetalsegError, PyValueError);

fn err(e: metalseg::Error) -> PyErr {
    MetalsegError::new_err(format!("{}: {e}", e.kind()))
}

fn shape<T>(rows: &[Vec<T>]) -> PyResult<(usize, usize)> {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != w) {
        return Err(MetalsegError::new_err("rows differ in length"));
    }
    Ok((w, h))
}

fn to_mask(rows: Vec<Vec<f64>>) -> PyResult<BinaryMask> {
    let (w, h) = shape(&rows)?;
    BinaryMask::new(w, h, rows.into_iter().flatten().map(|v| v != 0.0).collect()).map_err(err)
}

fn to_map(rows: Vec<Vec<f64>>) -> PyResult<LikelihoodMap> {
    let (w, h) = shape(&rows)?;
    LikelihoodMap::new(w, h, rows.into_iter().flatten().collect()).map_err(err)
}

fn to_gray(rows: Vec<Vec<u8>>) -> PyResult<GrayImage> {
    let (w, h) = shape(&rows)?;
    GrayImage::new(w, h, rows.into_iter().flatten().collect()).map_err(err)
}

fn rows_of<T: Copy>(values: &[T], w: usize) -> Vec<Vec<T>> {
    values.chunks(w).map(<[T]>::to_vec).collect()
}

/// Widened so Python sees int lists rather than `bytes`.
fn pixel_rows(img: &GrayImage) -> Vec<Vec<u16>> {
    img.pixels().chunks(img.width()).map(|r| r.iter().map(|&v| u16::from(v)).collect()).collect()
}

fn grad_rows(g: &GradientMap) -> Vec<Vec<f64>> {
    rows_of(&g.values, g.width)
}

fn filtration(name: &str) -> PyResult<Filtration> {
    match name {
        "sublevel" => Ok(Filtration::Sublevel),
        "superlevel" => Ok(Filtration::Superlevel),
        _ => Err(MetalsegError::new_err(format!("unknown filtration `{name}`"))),
    }
}

fn filtration_type(name: &str) -> PyResult<FiltrationType> {
    match name {
        "bothlevels" => Ok(FiltrationType::Bothlevels),
        _ => filtration(name).map(|f| match f {
            Filtration::Sublevel => FiltrationType::Sublevel,
            Filtration::Superlevel => FiltrationType::Superlevel,
        }),
    }
}

fn defect_kind(name: &str) -> PyResult<DefectKind> {
    serde_json::from_value(serde_json::Value::String(name.to_owned()))
        .map_err(|_| MetalsegError::new_err(format!("unknown defect kind `{name}`")))
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "metalseg")]
#[derive(Clone)]
pub struct EsdReport {
    opens: u64,
    shorts: u64,
    false_positives: u64,
    false_negatives: u64,
    total: u64,
    gt_line_count: u64,
    /// `None` when the ground truth has no lines.
    rate_percent: Option<f64>,
}

impl From<metalseg::EsdReport> for EsdReport {
    fn from(r: metalseg::EsdReport) -> Self {
        Self {
            opens: r.opens,
            shorts: r.shorts,
            false_positives: r.false_positives,
            false_negatives: r.false_negatives,
            total: r.total,
            gt_line_count: r.gt_line_count,
            rate_percent: r.rate_percent,
        }
    }
}

#[pymethods]
impl EsdReport {
    fn __repr__(&self) -> String {
        format!(
            "EsdReport(opens={}, shorts={}, false_positives={}, false_negatives={}, gt_line_count={})",
            self.opens, self.shorts, self.false_positives, self.false_negatives, self.gt_line_count
        )
    }
}

#[pyclass(frozen, get_all, module = "metalseg")]
pub struct PixelMetrics {
    pixel_accuracy: f64,
    dice: f64,
    iou: f64,
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "metalseg")]
#[derive(Clone)]
pub struct PersistenceBar {
    dim: u8,
    birth: f64,
    death: f64,
    birth_pixel: (usize, usize),
    death_pixel: Option<(usize, usize)>,
    essential: bool,
}

#[pymethods]
impl PersistenceBar {
    fn __repr__(&self) -> String {
        format!("PersistenceBar(dim={}, birth={}, death={})", self.dim, self.birth, self.death)
    }
}

#[pyclass(frozen, module = "metalseg")]
pub struct Barcode(metalseg::Barcode);

#[pymethods]
impl Barcode {
    #[getter]
    fn bars(&self) -> Vec<PersistenceBar> {
        self.0
            .bars
            .iter()
            .map(|b| PersistenceBar {
                dim: b.dim,
                birth: b.birth,
                death: b.death,
                birth_pixel: b.birth_pixel,
                death_pixel: b.death_pixel,
                essential: b.essential,
            })
            .collect()
    }

    /// `(b0, b1)` of the filtration at `eps`.
    fn betti_numbers(&self, eps: f64) -> (usize, usize) {
        metalseg::betti_numbers(&self.0, eps)
    }

    fn __len__(&self) -> usize {
        self.0.bars.len()
    }
}

#[pyfunction]
#[pyo3(signature = (pred, gt, min_overlap = 1))]
fn esd_errors(pred: Vec<Vec<f64>>, gt: Vec<Vec<f64>>, min_overlap: usize) -> PyResult<EsdReport> {
    metalseg::esd_errors(&to_mask(pred)?, &to_mask(gt)?, min_overlap)
        .map(Into::into)
        .map_err(err)
}

#[pyfunction]
fn pixel_metrics(pred: Vec<Vec<f64>>, gt: Vec<Vec<f64>>) -> PyResult<PixelMetrics> {
    let m = metalseg::pixel_metrics(&to_mask(pred)?, &to_mask(gt)?).map_err(err)?;
    Ok(PixelMetrics {
        pixel_accuracy: m.pixel_accuracy,
        dice: m.dice,
        iou: m.iou,
    })
}

#[pyfunction]
#[pyo3(signature = (map, filtration = "sublevel"))]
fn barcode(map: Vec<Vec<f64>>, filtration: &str) -> PyResult<Barcode> {
    let f = self::filtration(filtration)?;
    metalseg::barcode(&to_map(map)?, f).map(Barcode).map_err(err)
}

/// Betti matching loss of `pred` against `gt` and its gradient.
#[pyfunction]
#[pyo3(signature = (gt, pred, filtration_type = "sublevel", length_threshold = 0.345, push_to_1_0 = true))]
fn betti_loss(
    gt: Vec<Vec<f64>>,
    pred: Vec<Vec<f64>>,
    filtration_type: &str,
    length_threshold: f64,
    push_to_1_0: bool,
) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let cfg = BettiMatchConfig {
        filtration_type: self::filtration_type(filtration_type)?,
        barcode_length_threshold: length_threshold,
        push_unmatched_to_1_0: push_to_1_0,
    };
    let r = loss::betti_loss(&to_map(gt)?, &to_map(pred)?, &cfg).map_err(err)?;
    Ok((r.loss, grad_rows(&r.grad)))
}

/// Blended loss `(1 - lambda) (alpha BCE + (1 - alpha) Dice) + lambda Betti`,
/// its gradient and the individual terms.
#[pyfunction]
#[pyo3(signature = (gt, pred, alpha = 0.6, lambda_ = 0.375, filtration_type = "sublevel"))]
fn seg_loss(
    gt: Vec<Vec<f64>>,
    pred: Vec<Vec<f64>>,
    alpha: f64,
    lambda_: f64,
    filtration_type: &str,
) -> PyResult<(f64, Vec<Vec<f64>>, Vec<(&'static str, f64)>)> {
    let cfg = LossConfig {
        alpha,
        lambda: lambda_,
        betti: BettiMatchConfig {
            filtration_type: self::filtration_type(filtration_type)?,
            ..Default::default()
        },
        ..Default::default()
    };
    let s = loss::seg_loss(&to_map(gt)?, &to_map(pred)?, &cfg).map_err(err)?;
    let b = s.breakdown;
    let terms = vec![("bce", b.bce), ("dice", b.dice), ("pixel", b.pixel), ("betti", b.betti)];
    Ok((s.value, grad_rows(&s.grad), terms))
}

/// Patch origins `(x, y)` covering a `width x height` image.
#[pyfunction]
#[pyo3(signature = (width, height, patch_size = 512, min_overlap_fraction = 0.10))]
fn plan_patches(width: usize, height: usize, patch_size: usize, min_overlap_fraction: f64) -> PyResult<Vec<(usize, usize)>> {
    let cfg = FusionConfig {
        patch_size,
        min_overlap_fraction,
        ..Default::default()
    };
    plan(width, height, &cfg).map(|g| g.origins).map_err(err)
}

/// Point prompts `(x, y)` on the bright structure of an 8-bit image.
#[pyfunction]
#[pyo3(signature = (image, n_points = 5, quantile = 0.95, seed = 0))]
fn sample_prompts(image: Vec<Vec<u8>>, n_points: usize, quantile: f64, seed: u64) -> PyResult<Vec<(usize, usize)>> {
    let cfg = PromptConfig {
        n_points,
        quantile,
        seed,
        ..Default::default()
    };
    let mask = foreground_seed_mask(&to_gray(image)?, &cfg).map_err(err)?;
    Ok(sample(&mask, &cfg))
}

/// A synthetic layer: `(image, gt, line_count, midpoint)`.
#[pyfunction]
#[pyo3(signature = (seed = 0, width = 256, height = 256, noiseless = false))]
fn synthesize(seed: u64, width: usize, height: usize, noiseless: bool) -> PyResult<(Vec<Vec<u16>>, Vec<Vec<bool>>, usize, u8)> {
    let mut cfg = SynthConfig {
        seed,
        width,
        height,
        ..Default::default()
    };
    if noiseless {
        cfg = cfg.noiseless();
    }
    let s = generate(&cfg).map_err(err)?;
    Ok((pixel_rows(&s.image), rows_of(s.gt.bits(), width), s.line_count, s.midpoint))
}

/// Draws `(kind, count)` defects into `image`; returns the new image and the
/// ESD a faithful segmentation of it incurs against `gt`.
#[pyfunction]
#[pyo3(signature = (image, gt, defects, seed = 0))]
fn inject_defects(
    image: Vec<Vec<u8>>,
    gt: Vec<Vec<f64>>,
    defects: Vec<(String, usize)>,
    seed: u64,
) -> PyResult<(Vec<Vec<u16>>, EsdReport)> {
    let specs = defects
        .iter()
        .map(|(k, n)| defect_kind(k).map(|k| DefectSpec::new(k, *n)))
        .collect::<PyResult<Vec<_>>>()?;
    let img = to_gray(image)?;
    let inj = inject_defect_set(&img, &to_mask(gt)?, &specs, seed).map_err(err)?;
    Ok((pixel_rows(&inj.image), inj.expected_esd_delta.into()))
}

#[pymodule]
#[pyo3(name = "metalseg")]
fn metalseg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MetalsegError", m.py().get_type::<MetalsegError>())?;
    m.add_class::<EsdReport>()?;
    m.add_class::<PixelMetrics>()?;
    m.add_class::<PersistenceBar>()?;
    m.add_class::<Barcode>()?;
    m.add_function(wrap_pyfunction!(esd_errors, m)?)?;
    m.add_function(wrap_pyfunction!(pixel_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(barcode, m)?)?;
    m.add_function(wrap_pyfunction!(betti_loss, m)?)?;
    m.add_function(wrap_pyfunction!(seg_loss, m)?)?;
    m.add_function(wrap_pyfunction!(plan_patches, m)?)?;
    m.add_function(wrap_pyfunction!(sample_prompts, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(inject_defects, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let flat = [1, 2, 3, 4, 5, 6];
        assert_eq!(rows_of(&flat, 3), vec![vec![1, 2, 3], vec![4, 5, 6]]);
    }

    #[test]
    fn names_parse() {
        assert_eq!(filtration_type("bothlevels").unwrap(), FiltrationType::Bothlevels);
        assert_eq!(filtration_type("superlevel").unwrap(), FiltrationType::Superlevel);
        assert_eq!(defect_kind("speckle_field").unwrap(), DefectKind::SpeckleField);
    }
}
