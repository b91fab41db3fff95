//! C ABI for the summarization engine.
//!
//! Conventions: functions return a [`PsStatus`] code and write results
//! through out-pointers. Strings returned through `char **` are allocated
//! here and must be released with [`ps_string_free`]. The engine is an
//! opaque handle created from a TOML config string; handles are not
//! thread-safe, use one per thread. On any non-OK status a human-readable
//! message is available from [`ps_last_error_message`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use libc::{c_char, c_uint, size_t};

use propsum::corpus::Topic;
use propsum::pipeline::reports::evaluate_summary;
use propsum::pipeline::{
    persist_run, run_pipeline, BackendRegistry, PipelineConfig, PipelineError,
};
use propsum::rouge::{self, MultiRef, RougeConfig};

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    PsOk = 0,
    PsNullArgument = 1,
    PsInvalidUtf8 = 2,
    PsConfigError = 3,
    PsDataError = 4,
    PsBackendError = 5,
    PsInternalError = 6,
}

/// Precision / recall / F1 triple.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsRougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Plain-data mirror of the scoring configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsRougeConfig {
    /// Candidate truncation limit in words.
    pub max_words: size_t,
    pub stem: bool,
    pub remove_stopwords: bool,
    /// 0 = average over references, 1 = best reference.
    pub multi_ref_max: bool,
    pub skip_distance: size_t,
    pub include_unigrams_in_su: bool,
}

impl From<PsRougeConfig> for RougeConfig {
    fn from(c: PsRougeConfig) -> Self {
        RougeConfig {
            max_words: c.max_words,
            stem: c.stem,
            remove_stopwords: c.remove_stopwords,
            multi_ref: if c.multi_ref_max {
                MultiRef::Max
            } else {
                MultiRef::Average
            },
            skip_distance: c.skip_distance,
            include_unigrams_in_su: c.include_unigrams_in_su,
        }
    }
}

/// Opaque pipeline engine: a validated configuration plus instantiated
/// backends.
pub struct PsEngine {
    config: PipelineConfig,
    registry: BackendRegistry,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message.replace('\0', " ")).ok();
    });
}

fn status_of(err: &PipelineError) -> PsStatus {
    match err {
        PipelineError::Config(_) => PsStatus::PsConfigError,
        PipelineError::Data(_) | PipelineError::Io(_) => PsStatus::PsDataError,
        PipelineError::Backend { .. } => PsStatus::PsBackendError,
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, PsStatus> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(PsStatus::PsNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        PsStatus::PsInvalidUtf8
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> PsStatus {
    match CString::new(s.replace('\0', " ")) {
        Ok(cs) => {
            unsafe { *out = cs.into_raw() };
            PsStatus::PsOk
        }
        Err(_) => {
            set_last_error("output contained an interior NUL");
            PsStatus::PsInternalError
        }
    }
}

fn guarded(body: impl FnOnce() -> PsStatus) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            PsStatus::PsInternalError
        }
    }
}

/// Library version as a heap string; free with `ps_string_free`.
#[no_mangle]
pub extern "C" fn ps_version() -> *mut c_char {
    CString::new(env!("CARGO_PKG_VERSION"))
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by a propsum function and not
/// yet freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message describing the most recent error on this thread; free with
/// `ps_string_free`. NULL when no error has occurred.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.clone().into_raw())
            .unwrap_or(std::ptr::null_mut())
    })
}

/// The default scoring configuration (100 words, stemming on, stopwords
/// kept, reference averaging, SU4 with unigrams).
#[no_mangle]
pub extern "C" fn ps_rouge_config_default() -> PsRougeConfig {
    let d = RougeConfig::default();
    PsRougeConfig {
        max_words: d.max_words,
        stem: d.stem,
        remove_stopwords: d.remove_stopwords,
        multi_ref_max: matches!(d.multi_ref, MultiRef::Max),
        skip_distance: d.skip_distance,
        include_unigrams_in_su: d.include_unigrams_in_su,
    }
}

unsafe fn collect_references(
    references: *const *const c_char,
    n_refs: size_t,
) -> Result<Vec<String>, PsStatus> {
    if references.is_null() {
        set_last_error("null references array");
        return Err(PsStatus::PsNullArgument);
    }
    let mut out = Vec::with_capacity(n_refs);
    for i in 0..n_refs {
        let ptr = *references.add(i);
        out.push(read_str(ptr)?.to_string());
    }
    Ok(out)
}

/// ROUGE-N F1 of `candidate` against `references`.
///
/// # Safety
/// `candidate` must be a NUL-terminated string, `references` an array of
/// `n_refs` NUL-terminated strings, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_rouge_n(
    candidate: *const c_char,
    references: *const *const c_char,
    n_refs: size_t,
    n: c_uint,
    cfg: PsRougeConfig,
    out: *mut PsRougeScore,
) -> PsStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return PsStatus::PsNullArgument;
        }
        let candidate = match read_str(candidate) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let references = match collect_references(references, n_refs) {
            Ok(r) => r,
            Err(status) => return status,
        };
        match rouge::rouge_n(candidate, &references, n as usize, &cfg.into()) {
            Ok(score) => {
                *out = PsRougeScore {
                    precision: score.precision,
                    recall: score.recall,
                    f1: score.f1,
                };
                PsStatus::PsOk
            }
            Err(e) => {
                set_last_error(e.to_string());
                PsStatus::PsDataError
            }
        }
    })
}

/// ROUGE-SU F1 (skip-bigrams plus unigrams) of `candidate` against
/// `references`.
///
/// # Safety
/// Same contract as `ps_rouge_n`.
#[no_mangle]
pub unsafe extern "C" fn ps_rouge_su4(
    candidate: *const c_char,
    references: *const *const c_char,
    n_refs: size_t,
    cfg: PsRougeConfig,
    out: *mut PsRougeScore,
) -> PsStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return PsStatus::PsNullArgument;
        }
        let candidate = match read_str(candidate) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let references = match collect_references(references, n_refs) {
            Ok(r) => r,
            Err(status) => return status,
        };
        match rouge::rouge_su4(candidate, &references, &cfg.into()) {
            Ok(score) => {
                *out = PsRougeScore {
                    precision: score.precision,
                    recall: score.recall,
                    f1: score.f1,
                };
                PsStatus::PsOk
            }
            Err(e) => {
                set_last_error(e.to_string());
                PsStatus::PsDataError
            }
        }
    })
}

/// Create an engine from a TOML configuration; pass NULL or an empty
/// string for the defaults. On success writes the handle to `out`.
///
/// # Safety
/// `config_toml` must be NULL or a NUL-terminated string; `out` must be a
/// valid pointer. Free the handle with `ps_engine_free`.
#[no_mangle]
pub unsafe extern "C" fn ps_engine_new(
    config_toml: *const c_char,
    out: *mut *mut PsEngine,
) -> PsStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return PsStatus::PsNullArgument;
        }
        let config = if config_toml.is_null() {
            Ok(PipelineConfig::default())
        } else {
            match read_str(config_toml) {
                Ok(raw) if raw.trim().is_empty() => Ok(PipelineConfig::default()),
                Ok(raw) => PipelineConfig::from_toml_str(raw),
                Err(status) => return status,
            }
        };
        let config = match config {
            Ok(c) => c,
            Err(e) => {
                set_last_error(e.to_string());
                return status_of(&e);
            }
        };
        match BackendRegistry::from_config(&config) {
            Ok(registry) => {
                *out = Box::into_raw(Box::new(PsEngine { config, registry }));
                PsStatus::PsOk
            }
            Err(e) => {
                set_last_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Destroy an engine handle. NULL is a no-op.
///
/// # Safety
/// `engine` must come from `ps_engine_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_engine_free(engine: *mut PsEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// The configuration hash naming this engine's run directories.
///
/// # Safety
/// `engine` must be a live handle; `out` a valid pointer. Free the string
/// with `ps_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ps_engine_config_hash(
    engine: *const PsEngine,
    out: *mut *mut c_char,
) -> PsStatus {
    guarded(|| {
        if engine.is_null() || out.is_null() {
            set_last_error("null argument");
            return PsStatus::PsNullArgument;
        }
        give_string((*engine).config.config_hash(), out)
    })
}

fn parse_topic(raw: &str) -> Result<Topic, PsStatus> {
    // Round-trip through the corpus loader so the topic gets the same
    // validation and document ordering as file input.
    let dir = match std::env::temp_dir().canonicalize() {
        Ok(d) => d,
        Err(_) => std::env::temp_dir(),
    };
    let path = dir.join(format!("propsum-ffi-{}.jsonl", std::process::id()));
    let write_and_load = || -> Result<Vec<Topic>, String> {
        std::fs::write(&path, format!("{raw}\n")).map_err(|e| e.to_string())?;
        let topics = propsum::corpus::load_corpus(&path).map_err(|e| e.to_string());
        let _ = std::fs::remove_file(&path);
        topics
    };
    match write_and_load() {
        Ok(mut topics) if topics.len() == 1 => Ok(topics.remove(0)),
        Ok(topics) => {
            set_last_error(format!("expected exactly one topic, got {}", topics.len()));
            Err(PsStatus::PsDataError)
        }
        Err(e) => {
            set_last_error(e);
            Err(PsStatus::PsDataError)
        }
    }
}

/// Summarize a single topic given as one topics.jsonl object. Writes the
/// bullet summary ("- " lines) to `out_summary`.
///
/// # Safety
/// `engine` must be a live handle, `topic_json` a NUL-terminated string,
/// `out_summary` a valid pointer. Free the result with `ps_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ps_engine_summarize_topic_json(
    engine: *mut PsEngine,
    topic_json: *const c_char,
    out_summary: *mut *mut c_char,
) -> PsStatus {
    guarded(|| {
        if engine.is_null() || out_summary.is_null() {
            set_last_error("null argument");
            return PsStatus::PsNullArgument;
        }
        let raw = match read_str(topic_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let topic = match parse_topic(raw) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let engine = &*engine;
        match run_pipeline(&topic, &engine.config, &engine.registry, None) {
            Ok(output) => give_string(output.artifact.summary_text(), out_summary),
            Err(e) => {
                set_last_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Run the pipeline over a topics.jsonl corpus, persisting artifacts under
/// `out_dir/<config_hash>/<topic_id>/`, and return a JSON report mapping
/// each topic to its ROUGE scores.
///
/// # Safety
/// `engine` must be a live handle; `topics_path`, `out_dir` NUL-terminated
/// paths; `out_report_json` a valid pointer. Free the result with
/// `ps_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ps_engine_run_corpus(
    engine: *mut PsEngine,
    topics_path: *const c_char,
    out_dir: *const c_char,
    out_report_json: *mut *mut c_char,
) -> PsStatus {
    guarded(|| {
        if engine.is_null() || out_report_json.is_null() {
            set_last_error("null argument");
            return PsStatus::PsNullArgument;
        }
        let topics_path = match read_str(topics_path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let out_dir = match read_str(out_dir) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let engine = &*engine;
        let topics = match propsum::corpus::load_corpus(topics_path) {
            Ok(t) => t,
            Err(e) => {
                set_last_error(e.to_string());
                return PsStatus::PsDataError;
            }
        };
        let mut report = serde_json::Map::new();
        for topic in &topics {
            let output = match run_pipeline(topic, &engine.config, &engine.registry, None) {
                Ok(o) => o,
                Err(e) => {
                    set_last_error(e.to_string());
                    return status_of(&e);
                }
            };
            if let Err(e) = persist_run(&output, Path::new(out_dir)) {
                set_last_error(e.to_string());
                return status_of(&e);
            }
            let scores = match evaluate_summary(
                &output.artifact.concatenated(),
                &topic.reference_texts(),
                &engine.config.rouge,
            ) {
                Ok(s) => s,
                Err(e) => {
                    set_last_error(e.to_string());
                    return PsStatus::PsDataError;
                }
            };
            let value = serde_json::to_value(&scores).unwrap_or(serde_json::Value::Null);
            report.insert(topic.topic_id.clone(), value);
        }
        match serde_json::to_string_pretty(&serde_json::Value::Object(report)) {
            Ok(json) => give_string(json, out_report_json),
            Err(e) => {
                set_last_error(e.to_string());
                PsStatus::PsInternalError
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        let ptr = ps_last_error_message();
        assert!(!ptr.is_null());
        let s = unsafe { CStr::from_ptr(ptr) }
            .to_string_lossy()
            .into_owned();
        unsafe { ps_string_free(ptr) };
        s
    }

    #[test]
    fn version_is_non_null() {
        let v = ps_version();
        assert!(!v.is_null());
        unsafe { ps_string_free(v) };
    }

    #[test]
    fn rouge_identity_scores_one() {
        let cand = c("the cat sat");
        let r = c("the cat sat");
        let refs = [r.as_ptr()];
        let mut out = PsRougeScore::default();
        let status = unsafe {
            ps_rouge_n(
                cand.as_ptr(),
                refs.as_ptr(),
                1,
                1,
                ps_rouge_config_default(),
                &mut out,
            )
        };
        assert_eq!(status, PsStatus::PsOk);
        assert!((out.f1 - 1.0).abs() < 1e-12);

        let status = unsafe {
            ps_rouge_su4(
                cand.as_ptr(),
                refs.as_ptr(),
                1,
                ps_rouge_config_default(),
                &mut out,
            )
        };
        assert_eq!(status, PsStatus::PsOk);
        assert!((out.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut out = PsRougeScore::default();
        let status = unsafe {
            ps_rouge_n(
                std::ptr::null(),
                std::ptr::null(),
                0,
                1,
                ps_rouge_config_default(),
                &mut out,
            )
        };
        assert_eq!(status, PsStatus::PsNullArgument);
        assert!(!last_error().is_empty());
    }

    #[test]
    fn empty_references_report_data_error() {
        let cand = c("a");
        let refs: [*const c_char; 0] = [];
        let mut out = PsRougeScore::default();
        let status = unsafe {
            ps_rouge_n(
                cand.as_ptr(),
                refs.as_ptr(),
                0,
                1,
                ps_rouge_config_default(),
                &mut out,
            )
        };
        assert_eq!(status, PsStatus::PsDataError);
    }

    #[test]
    fn engine_round_trip() {
        let mut engine: *mut PsEngine = std::ptr::null_mut();
        let status = unsafe { ps_engine_new(std::ptr::null(), &mut engine) };
        assert_eq!(status, PsStatus::PsOk);
        assert!(!engine.is_null());

        let mut hash: *mut c_char = std::ptr::null_mut();
        let status = unsafe { ps_engine_config_hash(engine, &mut hash) };
        assert_eq!(status, PsStatus::PsOk);
        let hash_str = unsafe { CStr::from_ptr(hash) }
            .to_str()
            .unwrap()
            .to_string();
        assert_eq!(hash_str.len(), 16);
        unsafe { ps_string_free(hash) };

        let topic = c(
            r#"{"topic_id":"t1","documents":[{"doc_id":"a","date":null,"sentences":["The volcano erupted on monday.","Noise one here."]},{"doc_id":"b","date":null,"sentences":["The volcano erupted monday."]}],"references":[{"ref_id":"r","text":"the volcano erupted"}]}"#,
        );
        let mut summary: *mut c_char = std::ptr::null_mut();
        let status =
            unsafe { ps_engine_summarize_topic_json(engine, topic.as_ptr(), &mut summary) };
        assert_eq!(status, PsStatus::PsOk);
        let text = unsafe { CStr::from_ptr(summary) }
            .to_str()
            .unwrap()
            .to_string();
        assert!(text.starts_with("- "), "summary: {text:?}");
        assert!(text.to_lowercase().contains("volcano"));
        unsafe { ps_string_free(summary) };
        unsafe { ps_engine_free(engine) };
    }

    #[test]
    fn bad_config_reports_config_error() {
        let mut engine: *mut PsEngine = std::ptr::null_mut();
        let cfg = c("salience_tau = 9.5");
        let status = unsafe { ps_engine_new(cfg.as_ptr(), &mut engine) };
        assert_eq!(status, PsStatus::PsConfigError);
        assert!(last_error().contains("salience_tau"));
    }

    #[test]
    fn malformed_topic_reports_data_error() {
        let mut engine: *mut PsEngine = std::ptr::null_mut();
        assert_eq!(
            unsafe { ps_engine_new(std::ptr::null(), &mut engine) },
            PsStatus::PsOk
        );
        let topic = c(r#"{"topic_id":"t1","documents":[],"references":[]}"#);
        let mut summary: *mut c_char = std::ptr::null_mut();
        let status =
            unsafe { ps_engine_summarize_topic_json(engine, topic.as_ptr(), &mut summary) };
        assert_eq!(status, PsStatus::PsDataError);
        unsafe { ps_engine_free(engine) };
    }

    #[test]
    fn generated_header_exposes_the_api() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("propsum.h");
        let content = std::fs::read_to_string(header).expect("header generated by build.rs");
        for symbol in [
            "ps_engine_new",
            "ps_engine_free",
            "ps_engine_summarize_topic_json",
            "ps_engine_run_corpus",
            "ps_rouge_n",
            "ps_rouge_su4",
            "ps_string_free",
            "ps_last_error_message",
            "PsStatus",
            "PsRougeScore",
        ] {
            assert!(content.contains(symbol), "{symbol} missing from header");
        }
    }
}
