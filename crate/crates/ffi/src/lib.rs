//! C ABI over [`abstract_mining::Session`].
//!
//! Sessions are opaque `AmSession` handles. Every fallible call returns an
//! [`AmStatus`]; on failure the thread's last error message is available
//! through [`am_last_error_message`]. Strings returned through `char **`
//! out-parameters are owned by the caller and released with
//! [`am_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use abstract_mining::medline::{parse_medline, IngestError};
use abstract_mining::report::{render_cluster_html, render_titles, titles_tsv};
use abstract_mining::service::SessionView;
use abstract_mining::session::{Session, SessionConfig, SessionError, DEFAULT_K};
use abstract_mining::text::Stopwords;
use chrono::DateTime;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    EmptyInput = 3,
    NoValidRecords = 4,
    CorpusTooSmall = 5,
    KOutOfRange = 6,
    AllDocumentsExcluded = 7,
    SingletonCluster = 8,
    AtRoot = 9,
    ClusterOutOfRange = 10,
    DataError = 11,
    Panic = 12,
}

impl AmStatus {
    fn name(self) -> &'static CStr {
        match self {
            AmStatus::Ok => c"ok",
            AmStatus::NullArgument => c"null_argument",
            AmStatus::InvalidUtf8 => c"invalid_utf8",
            AmStatus::EmptyInput => c"empty_input",
            AmStatus::NoValidRecords => c"no_valid_records",
            AmStatus::CorpusTooSmall => c"corpus_too_small",
            AmStatus::KOutOfRange => c"k_out_of_range",
            AmStatus::AllDocumentsExcluded => c"all_documents_excluded",
            AmStatus::SingletonCluster => c"singleton_cluster",
            AmStatus::AtRoot => c"at_root",
            AmStatus::ClusterOutOfRange => c"cluster_out_of_range",
            AmStatus::DataError => c"data_error",
            AmStatus::Panic => c"panic",
        }
    }
}

/// Opaque session handle.
pub struct AmSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(AmStatus, String);

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::CorpusTooSmall(_) => AmStatus::CorpusTooSmall,
            SessionError::KOutOfRange { .. } => AmStatus::KOutOfRange,
            SessionError::AllDocumentsExcluded => AmStatus::AllDocumentsExcluded,
            SessionError::SingletonCluster => AmStatus::SingletonCluster,
            SessionError::AtRoot => AmStatus::AtRoot,
            SessionError::ClusterOutOfRange { .. } => AmStatus::ClusterOutOfRange,
            SessionError::Matrix(_) | SessionError::Cluster(_) => AmStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let status = match e {
            IngestError::EmptyInput => AmStatus::EmptyInput,
            IngestError::NoValidRecords => AmStatus::NoValidRecords,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AmStatus::NullArgument, format!("{what} is null"))
}

fn set_last_error(message: &str) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

/// Runs `f`, records any failure for `am_last_error_message` and turns
/// panics into `AmStatus::Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            AmStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_last_error(&message);
            AmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p).to_str().map(Some).map_err(|_| Failure(AmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn session_ref<'a>(s: *const AmSession) -> Result<&'a Session, Failure> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("session"))
}

unsafe fn session_mut<'a>(s: *mut AmSession) -> Result<&'a mut Session, Failure> {
    s.as_mut().map(|s| &mut s.inner).ok_or_else(|| null("session"))
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let text = CString::new(text).map_err(|_| Failure(AmStatus::DataError, "output contains a NUL byte".into()))?;
    *out = text.into_raw();
    Ok(())
}

/// Parses a MEDLINE buffer and opens a session on it.
///
/// `k == 0` selects the default cluster count. `source_name` may be null.
/// On success `*out` receives a handle to release with `am_session_free`.
///
/// # Safety
/// `data` must point to `len` readable bytes; `source_name` must be null or
/// a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn am_session_open(
    data: *const u8,
    len: usize,
    source_name: *const c_char,
    k: usize,
    seed: u64,
    out: *mut *mut AmSession,
) -> AmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if data.is_null() && len > 0 {
            return Err(null("data"));
        }
        let bytes: &[u8] = if len == 0 { &[] } else { std::slice::from_raw_parts(data, len) };
        let source = str_arg(source_name, "source_name")?.unwrap_or("");
        let (corpus, _) = parse_medline(bytes, source)?;
        let k = if k == 0 { DEFAULT_K.min(corpus.len().saturating_sub(1)).max(1) } else { k };
        let config = SessionConfig { seed, stopwords: Arc::new(Stopwords::english()) };
        let session = Session::new(corpus, k, &config)?;
        *out = Box::into_raw(Box::new(AmSession { inner: session }));
        Ok(())
    })
}

/// Releases a session. Null is ignored.
///
/// # Safety
/// `session` must be null or a handle from `am_session_open` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn am_session_free(session: *mut AmSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Re-clusters into `k` groups after excluding documents containing any
/// of the whitespace-separated `exclude_words` (null for none).
///
/// # Safety
/// `session` must be a live handle; `exclude_words` must be null or a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn am_session_update(
    session: *mut AmSession,
    k: usize,
    exclude_words: *const c_char,
) -> AmStatus {
    guard(|| {
        let s = session_mut(session)?;
        let words = str_arg(exclude_words, "exclude_words")?.unwrap_or("");
        s.update(k, &[words])?;
        Ok(())
    })
}

/// Replaces the document set with the selected cluster and re-clusters.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_session_use_cluster(session: *mut AmSession) -> AmStatus {
    guard(|| Ok(session_mut(session)?.use_cluster()?))
}

/// Returns to the previous document set.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_session_back(session: *mut AmSession) -> AmStatus {
    guard(|| Ok(session_mut(session)?.back()?))
}

/// Selects 1-based cluster `cluster`.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_session_select(session: *mut AmSession, cluster: usize) -> AmStatus {
    guard(|| Ok(session_mut(session)?.select(cluster)?))
}

/// Current cluster count; 0 for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_session_k(session: *const AmSession) -> usize {
    session.as_ref().map_or(0, |s| s.inner.k())
}

/// Largest k the current document set allows; 0 for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_session_max_k(session: *const AmSession) -> usize {
    session.as_ref().map_or(0, |s| s.inner.max_k())
}

/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_session_document_count(session: *const AmSession) -> usize {
    session.as_ref().map_or(0, |s| s.inner.document_count())
}

/// 1-based selection; 0 for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_session_selected_cluster(session: *const AmSession) -> usize {
    session.as_ref().map_or(0, |s| s.inner.selected_cluster())
}

/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_session_history_depth(session: *const AmSession) -> usize {
    session.as_ref().map_or(0, |s| s.inner.history_depth())
}

/// Size of 1-based cluster `cluster`.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn am_session_cluster_size(
    session: *const AmSession,
    cluster: usize,
    out: *mut usize,
) -> AmStatus {
    guard(|| {
        let s = session_ref(session)?;
        let size = s.cluster_size(cluster)?;
        *out.as_mut().ok_or_else(|| null("out"))? = size;
        Ok(())
    })
}

/// The cluster panel, one `cluster N (size): words` line per cluster.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn am_session_panel_text(session: *const AmSession, out: *mut *mut c_char) -> AmStatus {
    guard(|| write_string(out, session_ref(session)?.panel_text()))
}

/// The panel and control state as JSON, in the HTTP API's shape.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn am_session_view_json(session: *const AmSession, out: *mut *mut c_char) -> AmStatus {
    guard(|| {
        let view = SessionView::from(session_ref(session)?);
        let json = serde_json::to_string(&view).map_err(|e| Failure(AmStatus::DataError, e.to_string()))?;
        write_string(out, json)
    })
}

/// Tab-separated PMID, date and title rows for 1-based `cluster`.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn am_session_titles_tsv(
    session: *const AmSession,
    cluster: usize,
    out: *mut *mut c_char,
) -> AmStatus {
    guard(|| write_string(out, titles_tsv(&render_titles(session_ref(session)?, cluster)?)))
}

/// HTML report for 1-based `cluster`, stamped with `generated_at` (Unix
/// seconds).
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn am_session_report_html(
    session: *const AmSession,
    cluster: usize,
    generated_at: i64,
    out: *mut *mut c_char,
) -> AmStatus {
    guard(|| {
        let when = DateTime::from_timestamp(generated_at, 0)
            .ok_or_else(|| Failure(AmStatus::DataError, format!("timestamp {generated_at} out of range")))?;
        write_string(out, render_cluster_html(session_ref(session)?, cluster, when)?)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn am_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or "" after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn am_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static snake_case name of a status code.
#[no_mangle]
pub extern "C" fn am_status_name(status: AmStatus) -> *const c_char {
    status.name().as_ptr()
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn am_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
