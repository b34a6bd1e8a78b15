//! C ABI over the tailoring engine.
//!
//! Every function returns a [`TailorStatus`]. On failure a message is kept in
//! thread-local storage and can be read with [`tailor_last_error`]. Strings
//! handed out through `out` pointers are owned by the caller and must be
//! released with [`tailor_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use tailor_core::config::{builtin_profiles, RunOverrides, DEFAULT_PROFILE};
use tailor_core::engine::{Engine, EngineError};
use tailor_core::ingest::{DocFormat, SourceDocument};
use tailor_core::jd::SkillLexicon;
use tailor_core::pipeline::{RunConfig, RunInputs};
use tailor_core::service::RunSummary;

/// Opaque engine handle.
pub struct TailorEngine {
    engine: Engine,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailorStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    UnknownRun = 4,
    Pipeline = 5,
    Store = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(TailorStatus, String);

impl From<EngineError> for Fail {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::UnknownRun(_) | EngineError::RunNotDone(_) => TailorStatus::UnknownRun,
            EngineError::InvalidInput { .. }
            | EngineError::UnknownItem { .. }
            | EngineError::NotApprovable { .. }
            | EngineError::Ingest(_) => TailorStatus::InvalidInput,
            EngineError::Pipeline(_) | EngineError::Gateway(_) => TailorStatus::Pipeline,
            _ => TailorStatus::Store,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TailorStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TailorStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TailorStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(TailorStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TailorStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn engine<'a>(p: *const TailorEngine) -> Result<&'a Engine, Fail> {
    p.as_ref()
        .map(|h| &h.engine)
        .ok_or_else(|| Fail(TailorStatus::NullArgument, "engine is null".into()))
}

unsafe fn hand_out(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(TailorStatus::NullArgument, "out is null".into()));
    }
    let c = CString::new(s).map_err(|_| Fail(TailorStatus::Store, "output contains a nul byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Opens (or creates) an engine rooted at `data_dir`. `profile` names a
/// built-in gateway profile; null selects the default mock profile.
///
/// # Safety
/// Pointers must be null or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailor_engine_open(
    data_dir: *const c_char,
    profile: *const c_char,
    out: *mut *mut TailorEngine,
) -> TailorStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail(TailorStatus::NullArgument, "out is null".into()));
        }
        let dir = text(data_dir, "data_dir")?;
        let name = if profile.is_null() {
            DEFAULT_PROFILE
        } else {
            text(profile, "profile")?
        };
        let cfg = builtin_profiles()
            .remove(name)
            .ok_or_else(|| Fail(TailorStatus::InvalidInput, format!("unknown gateway profile {name:?}")))?;
        let gateway = cfg.build().map_err(|e| Fail(TailorStatus::InvalidInput, e.to_string()))?;
        let engine = Engine::open(Path::new(dir), gateway, SkillLexicon::default())?;
        *out = Box::into_raw(Box::new(TailorEngine { engine }));
        Ok(())
    })
}

/// Releases an engine handle. Null is ignored.
///
/// # Safety
/// `engine` must come from [`tailor_engine_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tailor_engine_close(engine: *mut TailorEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Indexes a file into the vault. Kind and format follow the extension.
///
/// # Safety
/// `engine` and `path` must be valid; `out_chunks` may be null.
#[no_mangle]
pub unsafe extern "C" fn tailor_index_file(
    engine: *const TailorEngine,
    path: *const c_char,
    out_chunks: *mut usize,
) -> TailorStatus {
    guard(|| {
        let engine = self::engine(engine)?;
        let path = Path::new(text(path, "path")?);
        let doc = SourceDocument::from_path(path, false)
            .map_err(|e| Fail(TailorStatus::InvalidInput, format!("{}: {e}", path.display())))?;
        let report = engine.index_document(&doc)?;
        if !out_chunks.is_null() {
            *out_chunks = report.chunks;
        }
        Ok(())
    })
}

/// Tailors a markdown resume to a JD and writes a JSON run summary to `out_json`.
/// `config_json` holds optional run overrides (null for defaults).
///
/// # Safety
/// String pointers must be valid; `config_json` may be null; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailor_run(
    engine: *const TailorEngine,
    jd_text: *const c_char,
    resume_markdown: *const c_char,
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> TailorStatus {
    guard(|| {
        let engine = self::engine(engine)?;
        let overrides: RunOverrides = if config_json.is_null() {
            RunOverrides::default()
        } else {
            serde_json::from_str(text(config_json, "config_json")?)
                .map_err(|e| Fail(TailorStatus::InvalidInput, format!("config_json: {e}")))?
        };
        let config = overrides.apply(&RunConfig::default());
        let inputs = RunInputs {
            jd_text: text(jd_text, "jd_text")?.to_string(),
            resume_text: text(resume_markdown, "resume_markdown")?.to_string(),
            resume_format: DocFormat::Markdown,
            base_doc_id: "target".into(),
        };
        let state = engine.run(&inputs, &config)?;
        let json = serde_json::to_string(&RunSummary::of(&state)).expect("serializable");
        hand_out(out_json, json)
    })
}

/// Writes a stored rendering (`txt`, `md` or `html`) of a finished run to `out`.
///
/// # Safety
/// String pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailor_render(
    engine: *const TailorEngine,
    run_id: *const c_char,
    format: *const c_char,
    out: *mut *mut c_char,
) -> TailorStatus {
    guard(|| {
        let engine = self::engine(engine)?;
        let run_id = text(run_id, "run_id")?;
        let format = text(format, "format")?
            .parse()
            .map_err(|e: String| Fail(TailorStatus::InvalidInput, e))?;
        hand_out(out, engine.render(run_id, format)?)
    })
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn tailor_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tailor_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
