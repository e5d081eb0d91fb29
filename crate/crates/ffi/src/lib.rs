//! C ABI for `mqm-core`.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`MqmStatus`]. On failure a message
//!   is available from [`mqm_last_error`] on the same thread until the next
//!   failing call there.
//! * Objects are opaque handles created by `*_builtin`/`*_load`/`*_parse`
//!   functions and released by the matching `*_free`. Freeing NULL is a
//!   no-op.
//! * Strings returned through `char **out` are owned by the caller and must
//!   be released with [`mqm_string_free`].
//! * Panics never cross the boundary; they surface as `MQM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mqm_core::corpus::{CategoryFilter, Dataset};
use mqm_core::dataset_io::AnnotationStore;
use mqm_core::iaa::{cohens_kappa, kappa_report, SentenceLabelMatrix};
use mqm_core::report::{
    kappa_table, ratio_report, render_all, scope_count_report, scope_significance_report, significance_report,
    ReportFormat,
};
use mqm_core::scope::{scope_significance, scope_token_normalize, ScopeCountTable};
use mqm_core::stats::{
    chi_squared_2x2, error_ratio, significance_matrix, ContingencyTable2x2, CountTable, LowerError, PairMode,
    SignificanceOptions, Stars,
};
use mqm_core::taxonomy::{parse_taxonomy, Taxonomy};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MqmStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Text input (taxonomy, counts file) failed to parse.
    ParseError = 3,
    /// Input parsed but violates a data invariant.
    InvalidData = 4,
    /// Reading files failed.
    IoError = 5,
    /// A named system, annotator, category, or built-in does not exist.
    NotFound = 6,
    /// The statistic is undefined for this input (e.g. a zero marginal).
    NotComputable = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MqmFormat {
    Markdown = 0,
    Csv = 1,
    Json = 2,
}

impl From<MqmFormat> for ReportFormat {
    fn from(f: MqmFormat) -> Self {
        match f {
            MqmFormat::Markdown => ReportFormat::Markdown,
            MqmFormat::Csv => ReportFormat::Csv,
            MqmFormat::Json => ReportFormat::Json,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MqmPairMode {
    Adjacent = 0,
    All = 1,
}

impl From<MqmPairMode> for PairMode {
    fn from(m: MqmPairMode) -> Self {
        match m {
            MqmPairMode::Adjacent => PairMode::Adjacent,
            MqmPairMode::All => PairMode::All,
        }
    }
}

/// Pearson chi-squared result for a 2x2 table.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MqmChiSquare {
    pub chi2: f64,
    pub p: f64,
    pub min_expected: f64,
    /// 0, 1, or 2 significance stars (no expected-count rule applied).
    pub stars: u8,
    /// -1 when system A has the lower error ratio, 1 when B does, 0 if equal.
    pub lower: i8,
}

/// Cohen's kappa. `kappa` is NaN and `computable` false when expected
/// agreement is 1.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MqmKappa {
    pub kappa: f64,
    pub observed: f64,
    pub expected: f64,
    pub items: usize,
    pub computable: bool,
}

/// Opaque taxonomy handle.
pub struct MqmTaxonomy(Taxonomy);

/// Opaque dataset handle.
pub struct MqmDataset(Dataset);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(MqmStatus, String);

fn fail(status: MqmStatus, msg: impl ToString) -> Failure {
    Failure(status, msg.to_string())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MqmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MqmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            MqmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(MqmStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MqmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(MqmStatus::NullArgument, format!("{what} is NULL")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(MqmStatus::NullArgument, format!("{what} is NULL")))
}

fn give_string(out: &mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| fail(MqmStatus::InvalidData, "output contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failure on this thread, or "" if none. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn mqm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mqm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn mqm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Built-in taxonomy by name: `core` or `slavic`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mqm_taxonomy_builtin(name: *const c_char, out: *mut *mut MqmTaxonomy) -> MqmStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let out = out_arg(out, "out")?;
        let t = Taxonomy::builtin(name).map_err(|e| fail(MqmStatus::NotFound, e))?;
        *out = Box::into_raw(Box::new(MqmTaxonomy(t)));
        Ok(())
    })
}

/// Parses taxonomy definition text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mqm_taxonomy_parse(text: *const c_char, out: *mut *mut MqmTaxonomy) -> MqmStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        let t = parse_taxonomy(text).map_err(|e| fail(MqmStatus::ParseError, e))?;
        *out = Box::into_raw(Box::new(MqmTaxonomy(t)));
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mqm_taxonomy_free(t: *mut MqmTaxonomy) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of categories, or 0 for NULL.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mqm_taxonomy_len(t: *const MqmTaxonomy) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// Category tree as JSON.
///
/// # Safety
/// `t` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mqm_taxonomy_to_json(t: *const MqmTaxonomy, out: *mut *mut c_char) -> MqmStatus {
    guard(|| {
        let t = handle(t, "taxonomy")?;
        let out = out_arg(out, "out")?;
        let json = serde_json::to_string(&t.0.to_tree()).map_err(|e| fail(MqmStatus::InvalidData, e))?;
        give_string(out, json)
    })
}

/// Canonical definition text.
///
/// # Safety
/// `t` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mqm_taxonomy_to_text(t: *const MqmTaxonomy, out: *mut *mut c_char) -> MqmStatus {
    guard(|| {
        let t = handle(t, "taxonomy")?;
        give_string(out_arg(out, "out")?, t.0.to_text())
    })
}

/// Loads a dataset directory, replaying its annotation log if present.
///
/// # Safety
/// `dir` must be a NUL-terminated path; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mqm_dataset_load(dir: *const c_char, out: *mut *mut MqmDataset) -> MqmStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let out = out_arg(out, "out")?;
        let store = AnnotationStore::open(Path::new(dir)).map_err(|e| {
            let status =
                match e {
                    mqm_core::dataset_io::DatasetError::Io { .. }
                    | mqm_core::dataset_io::DatasetError::MissingFile(_) => MqmStatus::IoError,
                    mqm_core::dataset_io::DatasetError::Schema { .. }
                    | mqm_core::dataset_io::DatasetError::Taxonomy(_) => MqmStatus::ParseError,
                    _ => MqmStatus::InvalidData,
                };
            fail(status, e)
        })?;
        *out = Box::into_raw(Box::new(MqmDataset(store.snapshot().clone())));
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mqm_dataset_free(d: *mut MqmDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Real output tokens of `system` plus one per phantom span by `annotator`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mqm_dataset_effective_token_count(
    d: *const MqmDataset,
    system: *const c_char,
    annotator: *const c_char,
    out: *mut u64,
) -> MqmStatus {
    guard(|| {
        let d = handle(d, "dataset")?;
        let system = str_arg(system, "system")?;
        let annotator = str_arg(annotator, "annotator")?;
        *out_arg(out, "out")? =
            d.0.effective_token_count(system, annotator)
                .map_err(|e| fail(MqmStatus::NotFound, e))?;
        Ok(())
    })
}

/// Error tokens of `system` in `category` (descendants included) over all
/// annotators. A NULL `category` counts any error.
///
/// # Safety
/// Pointers must be valid; `category` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mqm_dataset_error_tokens(
    d: *const MqmDataset,
    system: *const c_char,
    category: *const c_char,
    out: *mut u64,
) -> MqmStatus {
    guard(|| {
        let d = handle(d, "dataset")?;
        let system = str_arg(system, "system")?;
        let filter = if category.is_null() {
            CategoryFilter::Any
        } else {
            CategoryFilter::subtree(str_arg(category, "category")?)
        };
        let annotators: Vec<&str> = d.0.annotators().iter().map(String::as_str).collect();
        *out_arg(out, "out")? =
            d.0.error_tokens(system, &filter, &annotators)
                .map_err(|e| fail(MqmStatus::NotFound, e))?;
        Ok(())
    })
}

/// Agreement, ratio, and significance tables for a dataset.
///
/// # Safety
/// `d` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mqm_dataset_report(
    d: *const MqmDataset,
    mode: MqmPairMode,
    min_expected: f64,
    format: MqmFormat,
    out: *mut *mut c_char,
) -> MqmStatus {
    guard(|| {
        let d = &handle(d, "dataset")?.0;
        let out = out_arg(out, "out")?;
        let counts = d.count_table().map_err(|e| fail(MqmStatus::InvalidData, e))?;
        let m = significance_matrix(&counts, mode.into(), &SignificanceOptions { min_expected })
            .map_err(|e| fail(MqmStatus::InvalidData, e))?;
        let kappa = kappa_report(d).map_err(|e| fail(MqmStatus::InvalidData, e))?;
        let tables = [
            kappa_table(&kappa, Some(d.taxonomy())),
            ratio_report(&counts, Some(d.taxonomy())),
            significance_report(&m, Some(d.taxonomy())),
        ];
        give_string(out, render_all(&tables, format.into()))
    })
}

/// `err / total`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mqm_error_ratio(err: u64, total: u64, out: *mut f64) -> MqmStatus {
    guard(|| {
        let r = error_ratio(err, total).map_err(|e| fail(MqmStatus::InvalidData, e))?;
        *out_arg(out, "out")? = r.ratio();
        Ok(())
    })
}

/// Pearson chi-squared (1 dof, no continuity correction) for
/// `[[ok_a, err_a], [ok_b, err_b]]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mqm_chi_squared_2x2(
    ok_a: u64,
    err_a: u64,
    ok_b: u64,
    err_b: u64,
    out: *mut MqmChiSquare,
) -> MqmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = ContingencyTable2x2::from_counts(ok_a, err_a, ok_b, err_b);
        let r = chi_squared_2x2(&t).map_err(|e| fail(MqmStatus::NotComputable, e))?;
        *out = MqmChiSquare {
            chi2: r.chi2,
            p: r.p,
            min_expected: r.min_expected,
            stars: match Stars::from_p(r.p) {
                Stars::None => 0,
                Stars::One => 1,
                Stars::Two => 2,
            },
            lower: match r.lower_error {
                LowerError::A => -1,
                LowerError::B => 1,
                LowerError::Equal => 0,
            },
        };
        Ok(())
    })
}

/// Cohen's kappa over two label arrays of length `n` (nonzero = present).
///
/// # Safety
/// `a` and `b` must point to `n` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mqm_cohens_kappa(a: *const u8, b: *const u8, n: usize, out: *mut MqmKappa) -> MqmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if n > 0 && (a.is_null() || b.is_null()) {
            return Err(fail(MqmStatus::NullArgument, "label array is NULL"));
        }
        let labels = |p: *const u8| -> Vec<bool> {
            if n == 0 {
                Vec::new()
            } else {
                std::slice::from_raw_parts(p, n).iter().map(|&x| x != 0).collect()
            }
        };
        let m = SentenceLabelMatrix::from_labels(labels(a), labels(b)).map_err(|e| fail(MqmStatus::InvalidData, e))?;
        let r = cohens_kappa(&m).map_err(|e| fail(MqmStatus::NotComputable, e))?;
        *out = MqmKappa {
            kappa: r.kappa.unwrap_or(f64::NAN),
            observed: r.observed,
            expected: r.expected,
            items: r.items,
            computable: r.kappa.is_some(),
        };
        Ok(())
    })
}

/// Significance table from counts-file text (`category_id,system_id,ok,err`).
/// `taxonomy` may be NULL; otherwise it supplies row labels and indentation.
///
/// # Safety
/// `counts_csv` must be NUL-terminated; `taxonomy` NULL or live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mqm_significance_from_counts(
    counts_csv: *const c_char,
    taxonomy: *const MqmTaxonomy,
    mode: MqmPairMode,
    min_expected: f64,
    format: MqmFormat,
    out: *mut *mut c_char,
) -> MqmStatus {
    guard(|| {
        let text = str_arg(counts_csv, "counts_csv")?;
        let out = out_arg(out, "out")?;
        let counts = CountTable::from_csv(text).map_err(|e| fail(MqmStatus::ParseError, e))?;
        let m = significance_matrix(&counts, mode.into(), &SignificanceOptions { min_expected })
            .map_err(|e| fail(MqmStatus::InvalidData, e))?;
        let tax = taxonomy.as_ref().map(|t| &t.0);
        give_string(out, render_all(&[significance_report(&m, tax)], format.into()))
    })
}

/// Scope count and normalized significance tables from scope-count text
/// (`system_id,level,element,count`, with `tokens` rows).
///
/// # Safety
/// `scope_csv` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mqm_scope_from_counts(
    scope_csv: *const c_char,
    tokens_per_error: u64,
    mode: MqmPairMode,
    min_expected: f64,
    format: MqmFormat,
    out: *mut *mut c_char,
) -> MqmStatus {
    guard(|| {
        let text = str_arg(scope_csv, "scope_csv")?;
        let out = out_arg(out, "out")?;
        let c = ScopeCountTable::from_csv(text).map_err(|e| fail(MqmStatus::ParseError, e))?;
        let n = scope_token_normalize(&c, tokens_per_error).map_err(|e| fail(MqmStatus::InvalidData, e))?;
        let s = scope_significance(&n, mode.into(), &SignificanceOptions { min_expected });
        let tables = [scope_count_report(&c), scope_significance_report(&s)];
        give_string(out, render_all(&tables, format.into()))
    })
}
