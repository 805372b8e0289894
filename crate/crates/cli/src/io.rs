//! Channel, state and Choi file formats. Complex entries are `[re, im]` pairs.

use std::path::Path;

use qchan::channels::{kernel_from_kraus, ChannelDensity};
use qchan::numkit::{c64, herm_eig, identity, op_dist, partial_trace, ComplexMatrix, Factor};
use qchan::{DensityOperator, KrausChannel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub name: String,
    pub dim_in: usize,
    pub dim_out: usize,
    /// Schrödinger Kraus operators, each `dim_out × dim_in`.
    pub kraus: Vec<JsonMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dim: usize,
    pub matrix: JsonMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiDiagnostics {
    pub rank: usize,
    pub trace: f64,
    /// `‖tr_out Φ_μ - I‖_op`
    pub partial_trace_defect: f64,
}

/// Channel density kernel on `C^dim_in ⊗ C^dim_out`, input index major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiFile {
    #[serde(default)]
    pub name: Option<String>,
    pub dim_in: usize,
    pub dim_out: usize,
    pub kernel: JsonMatrix,
    /// Written by `choi`, ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ChoiDiagnostics>,
}

/// Raw bytes of an input file with their SHA-256.
pub struct Input {
    pub path: String,
    pub bytes: Vec<u8>,
    pub sha256: String,
}

pub fn read_input(path: &Path) -> Result<Input, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    Ok(Input {
        path: path.display().to_string(),
        bytes,
        sha256,
    })
}

pub fn parse_json<T: serde::de::DeserializeOwned>(input: &Input) -> Result<T, CliError> {
    serde_json::from_slice(&input.bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", input.path)))
}

pub fn matrix_from_json(m: &JsonMatrix, rows: usize, cols: usize, what: &str) -> Result<ComplexMatrix, CliError> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(CliError::Input(format!("{what} must be {rows}x{cols}")));
    }
    if m.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::Input(format!("{what} has non-finite entries")));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        let [re, im] = m[i][j];
        c64(re, im)
    }))
}

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// `heisenberg`: the file holds `F_j = conj(K_j)`. `validate`: apply the
/// trace-preservation gate.
pub fn channel_from_file(file: &ChannelFile, heisenberg: bool, validate: bool) -> Result<KrausChannel, CliError> {
    if file.kraus.is_empty() {
        return Err(CliError::Input(format!("channel {:?} has no Kraus operators", file.name)));
    }
    let ops = file
        .kraus
        .iter()
        .enumerate()
        .map(|(j, k)| matrix_from_json(k, file.dim_out, file.dim_in, &format!("Kraus operator {j}")))
        .collect::<Result<Vec<_>, _>>()?;
    let ch = if heisenberg {
        KrausChannel::from_heisenberg(ops)
    } else {
        KrausChannel::new(ops)
    }
    .map_err(CliError::input)?;
    if validate {
        ch.ensure_valid().map_err(CliError::input)?;
    }
    Ok(ch)
}

pub fn channel_to_file(name: &str, ch: &KrausChannel) -> ChannelFile {
    ChannelFile {
        name: name.to_string(),
        dim_in: ch.dim_in(),
        dim_out: ch.dim_out(),
        kraus: ch.kraus().iter().map(matrix_to_json).collect(),
    }
}

pub fn state_from_file(file: &StateFile) -> Result<DensityOperator, CliError> {
    if file.dim == 0 {
        return Err(CliError::Input("state dimension must be positive".into()));
    }
    let m = matrix_from_json(&file.matrix, file.dim, file.dim, "state matrix")?;
    DensityOperator::new(m).map_err(CliError::input)
}

pub fn state_to_file(rho: &DensityOperator) -> StateFile {
    StateFile {
        dim: rho.dim(),
        matrix: matrix_to_json(rho.matrix()),
    }
}

pub fn density_from_file(file: &ChoiFile) -> Result<ChannelDensity, CliError> {
    let size = file.dim_in * file.dim_out;
    if size == 0 {
        return Err(CliError::Input("Choi dimensions must be positive".into()));
    }
    let kernel = matrix_from_json(&file.kernel, size, size, "kernel")?;
    ChannelDensity::new(file.dim_in, file.dim_out, kernel).map_err(CliError::input)
}

pub fn density_to_file(name: &str, cd: &ChannelDensity) -> ChoiFile {
    ChoiFile {
        name: Some(name.to_string()),
        dim_in: cd.dim_in(),
        dim_out: cd.dim_out(),
        kernel: matrix_to_json(cd.kernel()),
        diagnostics: Some(ChoiDiagnostics {
            rank: cd.rank(),
            trace: cd.kernel().trace().re,
            partial_trace_defect: cd.normalization_defect(),
        }),
    }
}

/// Kernel of a possibly non-trace-preserving map, as emitted under `--no-validate`.
pub fn raw_kernel_to_file(name: &str, ch: &KrausChannel) -> Result<ChoiFile, CliError> {
    let (m, n) = (ch.dim_in(), ch.dim_out());
    let kernel = kernel_from_kraus(ch);
    let rank = herm_eig(&kernel).map_err(CliError::input)?.rank();
    let reduced = partial_trace(&kernel, (m, n), Factor::Second).map_err(CliError::input)?;
    Ok(ChoiFile {
        name: Some(name.to_string()),
        dim_in: m,
        dim_out: n,
        kernel: matrix_to_json(&kernel),
        diagnostics: Some(ChoiDiagnostics {
            rank,
            trace: kernel.trace().re,
            partial_trace_defect: op_dist(&reduced, &identity(m)),
        }),
    })
}

/// Writes `text` through a temporary file in the target directory and a rename.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(text.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qchan::channels::{density_from_kraus, zoo};

    fn input(text: &str) -> Input {
        Input {
            path: "<test>".into(),
            bytes: text.as_bytes().to_vec(),
            sha256: String::new(),
        }
    }

    #[test]
    fn channel_file_round_trip() {
        let ch = zoo::amplitude_damping(0.3).unwrap();
        let file = channel_to_file("ad", &ch);
        let text = serde_json::to_string(&file).unwrap();
        let back: ChannelFile = parse_json(&input(&text)).unwrap();
        assert_eq!(channel_from_file(&back, false, true).unwrap(), ch);
    }

    #[test]
    fn heisenberg_ingest_conjugates() {
        let u = ComplexMatrix::from_row_slice(2, 2, &[c64(0.0, 1.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let ch = zoo::unitary(&u).unwrap();
        let file = channel_to_file("phase", &ch);
        let read = channel_from_file(&file, true, true).unwrap();
        assert_eq!(read.kraus()[0], u.map(|z| z.conj()));
    }

    #[test]
    fn rejects_bad_channels() {
        let mut file = channel_to_file("id", &zoo::identity(2));
        file.kraus[0][0][0] = [2.0, 0.0];
        assert!(matches!(channel_from_file(&file, false, true), Err(CliError::Input(_))));
        assert!(channel_from_file(&file, false, false).is_ok());
        file.dim_in = 3;
        assert!(channel_from_file(&file, false, false).is_err());
        let empty = ChannelFile { kraus: vec![], ..channel_to_file("x", &zoo::identity(2)) };
        assert!(channel_from_file(&empty, false, false).is_err());
        assert!(parse_json::<ChannelFile>(&input("{\"name\": 1}")).is_err());
        assert!(parse_json::<ChannelFile>(&input("not json")).is_err());
    }

    #[test]
    fn state_file_gates() {
        let rho = DensityOperator::diagonal(&[0.25, 0.75]).unwrap();
        assert_eq!(state_from_file(&state_to_file(&rho)).unwrap(), rho);
        let bad = StateFile { dim: 2, matrix: vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]] };
        assert!(state_from_file(&bad).is_err());
        let neg = StateFile { dim: 2, matrix: vec![vec![[1.5, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [-0.5, 0.0]]] };
        assert!(state_from_file(&neg).is_err());
    }

    #[test]
    fn choi_file_round_trip() {
        let cd = density_from_kraus(&zoo::depolarizing(2, 1.0).unwrap()).unwrap();
        let file = density_to_file("dep", &cd);
        let d = file.diagnostics.as_ref().unwrap();
        assert_eq!(d.rank, 4);
        assert!((d.trace - 2.0).abs() < 1e-12);
        assert_eq!(density_from_file(&file).unwrap(), cd);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, "a").unwrap();
        write_atomic(&path, "b").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
