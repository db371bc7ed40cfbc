//! Python bindings: `import qudit_py`.
//!
//! Spectra and traces come back as `(x, y)` tuples of lists; fit results
//! as dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qudit_sim::analysis::{self, FringeInput};
use qudit_sim::ensemble::{InhomogeneousDistribution, Mechanism, Scheme};
use qudit_sim::multipole::{build_rate_matrix, RelaxationModel};
use qudit_sim::odmr::{self, DriveTone, OdmrSetup};
use qudit_sim::pulse::{self, RamseySetup};
use qudit_sim::spin::{self, Level, LevelModel, Transition};
use qudit_sim::{QuditError, Spectrum, TimeTrace};

fn err(e: QuditError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn transition(name: &str) -> PyResult<Transition> {
    Transition::ALL
        .into_iter()
        .find(|t| t.name() == name.to_lowercase())
        .ok_or_else(|| PyValueError::new_err(format!("unknown transition {name:?}, expected nu1..nu5")))
}

fn spectrum_xy(s: Spectrum) -> (Vec<f64>, Vec<f64>) {
    (s.freqs, s.values)
}

fn trace_xy(t: TimeTrace) -> (Vec<f64>, Vec<f64>) {
    (t.times, t.values)
}

/// Material constants. Units: MHz, MHz/mT, µs (T_p, T_d, T_f), ns (T₂*).
#[pyclass(name = "CenterParams", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    two_d: f64,
    gamma: f64,
    t_p: f64,
    t_d: f64,
    t_f: f64,
    t2_star: f64,
    pump_sign: i8,
}

impl PyParams {
    fn inner(&self) -> PyResult<qudit_sim::CenterParams> {
        let p = qudit_sim::CenterParams {
            two_d: self.two_d,
            gamma: self.gamma,
            t_p: self.t_p,
            t_d: self.t_d,
            t_f: self.t_f,
            t2_star: self.t2_star,
            pump_sign: self.pump_sign,
        };
        p.validate().map_err(err)?;
        Ok(p)
    }
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (two_d=26.8, gamma=28.0, t_p=300.0, t_d=100.0, t_f=50.0, t2_star=357.0, pump_sign=1))]
    fn new(two_d: f64, gamma: f64, t_p: f64, t_d: f64, t_f: f64, t2_star: f64, pump_sign: i8) -> PyResult<Self> {
        let p = Self {
            two_d,
            gamma,
            t_p,
            t_d,
            t_f,
            t2_star,
            pump_sign,
        };
        p.inner()?;
        Ok(p)
    }

    fn __repr__(&self) -> String {
        format!(
            "CenterParams(two_d={}, gamma={}, t_p={}, t_d={}, t_f={}, t2_star={}, pump_sign={})",
            self.two_d, self.gamma, self.t_p, self.t_d, self.t_f, self.t2_star, self.pump_sign
        )
    }
}

fn params_or_default(p: Option<PyRef<'_, PyParams>>) -> PyResult<qudit_sim::CenterParams> {
    match p {
        Some(p) => p.inner(),
        None => Ok(qudit_sim::CenterParams::default()),
    }
}

/// Static field (µT): B_z along the symmetry axis, B_⊥ across it.
#[pyclass(name = "FieldConfig", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyField {
    bz: f64,
    bperp: f64,
}

impl PyField {
    fn inner(&self) -> qudit_sim::FieldConfig {
        qudit_sim::FieldConfig::new(self.bz, self.bperp)
    }
}

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (bz=0.0, bperp=0.0))]
    fn new(bz: f64, bperp: f64) -> Self {
        Self { bz, bperp }
    }

    /// |B| in µT and θ in degrees from the symmetry axis.
    #[staticmethod]
    fn from_polar(b: f64, theta_deg: f64) -> Self {
        let f = qudit_sim::FieldConfig::from_polar(b, theta_deg.to_radians());
        Self { bz: f.bz, bperp: f.bperp }
    }

    fn magnitude(&self) -> f64 {
        self.inner().magnitude()
    }

    fn theta_deg(&self) -> f64 {
        self.inner().theta().to_degrees()
    }

    fn __repr__(&self) -> String {
        format!("FieldConfig(bz={}, bperp={})", self.bz, self.bperp)
    }
}

/// Gaussian spread of 2D (δD in MHz) sampled into packets.
#[pyclass(name = "Distribution", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyDist {
    d_mean: f64,
    d_sigma: f64,
    b_sigma: f64,
    n_packets: usize,
    /// "gauss_hermite", "uniform_grid" or "monte_carlo".
    scheme: String,
    seed: u64,
}

impl PyDist {
    fn inner(&self) -> PyResult<InhomogeneousDistribution> {
        let scheme = match self.scheme.as_str() {
            "gauss_hermite" => Scheme::GaussHermite,
            "uniform_grid" => Scheme::UniformGrid,
            "monte_carlo" => Scheme::MonteCarlo { seed: self.seed },
            s => return Err(PyValueError::new_err(format!("unknown scheme {s:?}"))),
        };
        let mechanism = match (self.d_sigma > 0.0, self.b_sigma > 0.0) {
            (_, false) => Mechanism::ZfsSpread,
            (false, true) => Mechanism::FieldSpread,
            (true, true) => Mechanism::Both,
        };
        let d = InhomogeneousDistribution {
            mechanism,
            d_mean: self.d_mean,
            d_sigma: self.d_sigma,
            b_sigma: self.b_sigma,
            n_packets: self.n_packets,
            scheme,
        };
        d.validate().map_err(err)?;
        Ok(d)
    }
}

#[pymethods]
impl PyDist {
    #[new]
    #[pyo3(signature = (d_mean=26.8, d_sigma=0.5, n_packets=41, scheme="gauss_hermite".to_string(), b_sigma=0.0, seed=0))]
    fn new(d_mean: f64, d_sigma: f64, n_packets: usize, scheme: String, b_sigma: f64, seed: u64) -> PyResult<Self> {
        let d = Self {
            d_mean,
            d_sigma,
            b_sigma,
            n_packets,
            scheme,
            seed,
        };
        d.inner()?;
        Ok(d)
    }

    /// (2D of each packet in MHz, weights).
    fn packets(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let p = qudit_sim::ensemble::enumerate_packets(&self.inner()?, qudit_sim::ensemble::DEFAULT_GAMMA_HOM_KHZ)
            .map_err(err)?;
        Ok((p.iter().map(|x| 2.0 * x.d_value).collect(), p.iter().map(|x| x.weight).collect()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Distribution(d_mean={}, d_sigma={}, n_packets={}, scheme={:?})",
            self.d_mean, self.d_sigma, self.n_packets, self.scheme
        )
    }
}

/// Energies (MHz) keyed "+3/2", "+1/2", "-1/2", "-3/2".
#[pyfunction]
#[pyo3(signature = (field, params=None, exact=true))]
fn levels<'py>(
    py: Python<'py>,
    field: PyRef<'_, PyField>,
    params: Option<PyRef<'_, PyParams>>,
    exact: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params_or_default(params)?;
    let lv = if exact {
        spin::exact_levels(&spin::build_hamiltonian(&p, &field.inner(), None)).map_err(err)?
    } else {
        spin::approx_levels(&p, &field.inner(), None)
    };
    let d = PyDict::new(py);
    for l in Level::ALL {
        d.set_item(l.label(), lv.energy(l))?;
    }
    Ok(d)
}

/// [(name, frequency MHz, relative strength)] for ν1..ν5.
#[pyfunction]
#[pyo3(signature = (field, params=None))]
fn transitions(field: PyRef<'_, PyField>, params: Option<PyRef<'_, PyParams>>) -> PyResult<Vec<(String, f64, f64)>> {
    let p = params_or_default(params)?;
    let lv = spin::exact_levels(&spin::build_hamiltonian(&p, &field.inner(), None)).map_err(err)?;
    Ok(spin::transition_table(&lv)
        .into_iter()
        .map(|l| (l.transition.name().to_string(), l.frequency, l.strength))
        .collect())
}

/// 4×4 population relaxation generator (µs⁻¹) for multipole times (µs).
#[pyfunction]
fn rate_matrix(t_p: f64, t_d: f64, t_f: f64) -> PyResult<Vec<Vec<f64>>> {
    let r = build_rate_matrix(&RelaxationModel::Multipole { t_p, t_d, t_f }).map_err(err)?;
    Ok((0..4).map(|i| (0..4).map(|j| r[(i, j)]).collect()).collect())
}

/// [(s, s', frequency)] for the nine pump-induced mode positions.
#[pyfunction]
#[pyo3(signature = (nu_pump, field, gamma=28.0))]
fn mode_frequencies(nu_pump: f64, field: PyRef<'_, PyField>, gamma: f64) -> Vec<(i8, i8, f64)> {
    odmr::mode_frequencies(nu_pump, &field.inner(), gamma)
        .into_iter()
        .map(|m| (m.s, m.sp, m.frequency))
        .collect()
}

fn odmr_setup(
    field: &PyField,
    dist: Option<PyRef<'_, PyDist>>,
    params: Option<PyRef<'_, PyParams>>,
    perturbative: bool,
) -> PyResult<OdmrSetup> {
    Ok(OdmrSetup {
        params: params_or_default(params)?,
        field: field.inner(),
        dist: match dist {
            Some(d) => d.inner()?,
            None => InhomogeneousDistribution::default(),
        },
        level_model: if perturbative {
            LevelModel::Perturbative
        } else {
            LevelModel::Exact
        },
        ..Default::default()
    })
}

/// ΔPL/PL over `grid` (MHz), optionally with a pump tone at `pump_mhz`.
#[pyfunction]
#[pyo3(signature = (grid, field, dist=None, params=None, pump_mhz=None, probe_dbm=-30.0, pump_dbm=-30.0, perturbative=false))]
#[allow(clippy::too_many_arguments)]
fn odmr_spectrum(
    grid: Vec<f64>,
    field: PyRef<'_, PyField>,
    dist: Option<PyRef<'_, PyDist>>,
    params: Option<PyRef<'_, PyParams>>,
    pump_mhz: Option<f64>,
    probe_dbm: f64,
    pump_dbm: f64,
    perturbative: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let setup = odmr_setup(&field, dist, params, perturbative)?;
    let first = *grid.first().ok_or_else(|| PyValueError::new_err("empty grid"))?;
    let pump = pump_mhz.map(|f| DriveTone::new(f, pump_dbm));
    odmr::odmr_spectrum(&setup, &grid, &DriveTone::new(first, probe_dbm), pump.as_ref())
        .map(spectrum_xy)
        .map_err(err)
}

/// Pump-on minus pump-off spectrum.
#[pyfunction]
#[pyo3(signature = (grid, field, pump_mhz, dist=None, params=None, probe_dbm=-30.0, pump_dbm=-30.0, perturbative=false))]
#[allow(clippy::too_many_arguments)]
fn lockin_difference(
    grid: Vec<f64>,
    field: PyRef<'_, PyField>,
    pump_mhz: f64,
    dist: Option<PyRef<'_, PyDist>>,
    params: Option<PyRef<'_, PyParams>>,
    probe_dbm: f64,
    pump_dbm: f64,
    perturbative: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let setup = odmr_setup(&field, dist, params, perturbative)?;
    let first = *grid.first().ok_or_else(|| PyValueError::new_err("empty grid"))?;
    odmr::lockin_difference(&setup, &grid, &DriveTone::new(first, probe_dbm), &DriveTone::new(pump_mhz, pump_dbm))
        .map(spectrum_xy)
        .map_err(err)
}

/// Two-frequency Ramsey signal at delays `taus` (ns). Unset arguments keep
/// the defaults (|B| = 223 µT at 19°, ν_pump 21.8, ν_probe 11.7 MHz).
#[pyfunction]
#[pyo3(signature = (taus, field=None, dist=None, params=None, nu_pump=None, nu_probe=None, select=true))]
fn ramsey(
    taus: Vec<f64>,
    field: Option<PyRef<'_, PyField>>,
    dist: Option<PyRef<'_, PyDist>>,
    params: Option<PyRef<'_, PyParams>>,
    nu_pump: Option<f64>,
    nu_probe: Option<f64>,
    select: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let mut s = RamseySetup {
        select,
        ..Default::default()
    };
    if let Some(f) = field {
        s.field = f.inner();
    }
    if let Some(d) = dist {
        s.dist = d.inner()?;
    }
    if params.is_some() {
        s.params = params_or_default(params)?;
    }
    s.nu_pump = nu_pump.unwrap_or(s.nu_pump);
    s.nu_probe = nu_probe.unwrap_or(s.nu_probe);
    pulse::ramsey_two_frequency(&s, &taus).map(trace_xy).map_err(err)
}

/// Ensemble Rabi nutation on `line` ("nu1".."nu5") vs pulse length (ns).
#[pyfunction]
#[pyo3(signature = (durations, freq, rabi, line="nu1", field=None, dist=None, params=None))]
#[allow(clippy::too_many_arguments)]
fn rabi(
    durations: Vec<f64>,
    freq: f64,
    rabi: f64,
    line: &str,
    field: Option<PyRef<'_, PyField>>,
    dist: Option<PyRef<'_, PyDist>>,
    params: Option<PyRef<'_, PyParams>>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let field = field.map_or_else(|| qudit_sim::FieldConfig::from_polar(223.0, 19f64.to_radians()), |f| f.inner());
    let dist = match dist {
        Some(d) => d.inner()?,
        None => InhomogeneousDistribution::single(26.8),
    };
    let p = params_or_default(params)?;
    pulse::ensemble_rabi_trace(
        &p,
        &dist,
        &field,
        &pulse::Pulse::new(freq, rabi, 0.0),
        transition(line)?,
        &odmr::OpticalPump::default(),
        &durations,
    )
    .map(trace_xy)
    .map_err(err)
}

fn trace(times: Vec<f64>, values: Vec<f64>) -> PyResult<TimeTrace> {
    TimeTrace::new(times, values).map_err(err)
}

/// Lorentzian fit of the FFT peak: f_r, width, err (MHz), fid, multimodal.
#[pyfunction]
fn fft_lorentzian<'py>(py: Python<'py>, times: Vec<f64>, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let pk = analysis::fft_lorentzian(&trace(times, values)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("f_r", pk.f_r)?;
    d.set_item("width", pk.width)?;
    d.set_item("err", pk.err)?;
    d.set_item("fid", pk.kind == analysis::SignalKind::Fid)?;
    d.set_item("multimodal", pk.multimodal)?;
    Ok(d)
}

/// Time-domain fit A·cos(2πf_R τ + φ)·exp(−τ/T₂*) + C.
#[pyfunction]
fn fit_decaying_sinusoid<'py>(py: Python<'py>, times: Vec<f64>, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let f = analysis::fit_decaying_sinusoid(&trace(times, values)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("f_r", f.f_r)?;
    d.set_item("f_r_err", f.f_r_err)?;
    d.set_item("t2_star", f.t2_star)?;
    d.set_item("t2_err", f.t2_err)?;
    d.set_item("amplitude", f.amplitude)?;
    d.set_item("fid", f.kind == analysis::SignalKind::Fid)?;
    Ok(d)
}

/// (B_eff, error) in µT from the probe frequency and fringe frequency (MHz)
/// and the field angle (deg).
#[pyfunction]
#[pyo3(signature = (nu_probe, f_r, theta, f_r_err=0.0, theta_err=0.0, gamma=28.0))]
fn b_eff_from_fringes(nu_probe: f64, f_r: f64, theta: f64, f_r_err: f64, theta_err: f64, gamma: f64) -> PyResult<(f64, f64)> {
    let e = analysis::b_eff_from_fringes(&FringeInput::new(nu_probe, f_r, theta).with_errors(f_r_err, theta_err), gamma)
        .map_err(err)?;
    Ok((e.b_eff, e.b_err))
}

/// Field and 2D from labeled lines, e.g. [("nu1", 21.8), ("nu2", 32.3)].
#[pyfunction]
#[pyo3(signature = (lines, two_d=None, params=None))]
fn invert_field<'py>(
    py: Python<'py>,
    lines: Vec<(String, f64)>,
    two_d: Option<f64>,
    params: Option<PyRef<'_, PyParams>>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params_or_default(params)?;
    let lines = lines
        .iter()
        .map(|(n, f)| Ok((transition(n)?, *f)))
        .collect::<PyResult<Vec<_>>>()?;
    let inv = analysis::invert_field_from_lines(&p, &lines, two_d).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("bz", inv.bz)?;
    d.set_item("bperp", inv.bperp)?;
    d.set_item("theta_deg", inv.theta_deg())?;
    d.set_item("two_d", inv.two_d)?;
    d.set_item("residual", inv.residual)?;
    Ok(d)
}

#[pymodule]
fn qudit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyDist>()?;
    m.add_function(wrap_pyfunction!(levels, m)?)?;
    m.add_function(wrap_pyfunction!(transitions, m)?)?;
    m.add_function(wrap_pyfunction!(rate_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(mode_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(odmr_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(lockin_difference, m)?)?;
    m.add_function(wrap_pyfunction!(ramsey, m)?)?;
    m.add_function(wrap_pyfunction!(rabi, m)?)?;
    m.add_function(wrap_pyfunction!(fft_lorentzian, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decaying_sinusoid, m)?)?;
    m.add_function(wrap_pyfunction!(b_eff_from_fringes, m)?)?;
    m.add_function(wrap_pyfunction!(invert_field, m)?)?;
    Ok(())
}
