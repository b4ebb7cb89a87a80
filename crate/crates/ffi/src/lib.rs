//! C ABI over path signatures, tensor algebra and the signature kernel.
//!
//! Objects are opaque handles created by `*_new`/`*_signature`-style calls and
//! released with the matching `*_free`. Every fallible call returns a
//! [`SigctlStatus`]; on failure [`sigctl_last_error`] describes the problem
//! for the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sigctl::sigkernel::{self, SignatureKernelConfig, StaticKernel};
use sigctl::{Error, PiecewisePath, TruncatedTensor};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigctlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    BufferTooSmall = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigctlStaticKernel {
    Linear = 0,
    Rbf = 1,
}

/// Piecewise-linear path.
pub struct SigctlPath(PiecewisePath);

/// Truncated tensor (a signature or a product of signatures).
pub struct SigctlTensor(TruncatedTensor);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SigctlStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::DepthMismatch { .. } => SigctlStatus::DimensionMismatch,
        Error::NonFinite(_) => SigctlStatus::NonFinite,
        Error::InvalidInput(_) | Error::EndpointMismatch { .. } | Error::GridOverflow { .. } => {
            SigctlStatus::InvalidInput
        }
        _ => SigctlStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SigctlStatus, String)>) -> SigctlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SigctlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sigctl".into());
            SigctlStatus::Panic
        }
    }
}

fn lib<T>(r: sigctl::Result<T>) -> Result<T, (SigctlStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SigctlStatus, String)> {
    p.as_ref().ok_or_else(|| (SigctlStatus::NullPointer, format!("{what} is null")))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), (SigctlStatus, String)> {
    if p.is_null() {
        Err((SigctlStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sigctl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a path from `n_points * dim` row-major coordinates.
#[no_mangle]
pub unsafe extern "C" fn sigctl_path_new(
    points: *const f64,
    n_points: usize,
    dim: usize,
    out: *mut *mut SigctlPath,
) -> SigctlStatus {
    guard(|| {
        check_out(out, "out")?;
        if points.is_null() {
            return Err((SigctlStatus::NullPointer, "points is null".into()));
        }
        if dim == 0 || n_points == 0 {
            return Err((SigctlStatus::InvalidInput, "a path needs at least one point of positive dimension".into()));
        }
        let len = n_points
            .checked_mul(dim)
            .ok_or((SigctlStatus::InvalidInput, "point buffer size overflows".to_string()))?;
        let flat = std::slice::from_raw_parts(points, len);
        let path = lib(PiecewisePath::new(flat.chunks(dim).map(<[f64]>::to_vec).collect()))?;
        *out = Box::into_raw(Box::new(SigctlPath(path)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sigctl_path_free(path: *mut SigctlPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of nodes, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sigctl_path_len(path: *const SigctlPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.len())
}

/// Dimension, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sigctl_path_dim(path: *const SigctlPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.dim())
}

/// Signature truncated at `depth`.
#[no_mangle]
pub unsafe extern "C" fn sigctl_path_signature(
    path: *const SigctlPath,
    depth: usize,
    out: *mut *mut SigctlTensor,
) -> SigctlStatus {
    guard(|| {
        let p = deref(path, "path")?;
        check_out(out, "out")?;
        let top = u32::try_from(depth).ok().and_then(|k| p.0.dim().checked_pow(k));
        if top.is_none_or(|n| n > sigctl::tensor::MAX_LEVEL_LEN) {
            return Err((SigctlStatus::InvalidInput, format!("depth {depth} is too large")));
        }
        *out = Box::into_raw(Box::new(SigctlTensor(p.0.signature(depth))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sigctl_tensor_free(tensor: *mut SigctlTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Number of coefficients including level 0, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sigctl_tensor_len(tensor: *const SigctlTensor) -> usize {
    tensor.as_ref().map_or(0, |t| t.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn sigctl_tensor_dim(tensor: *const SigctlTensor) -> usize {
    tensor.as_ref().map_or(0, |t| t.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn sigctl_tensor_depth(tensor: *const SigctlTensor) -> usize {
    tensor.as_ref().map_or(0, |t| t.0.depth())
}

/// Copies the coefficients, level by level in row-major word order, into
/// `buf`, which must hold `sigctl_tensor_len` values.
#[no_mangle]
pub unsafe extern "C" fn sigctl_tensor_copy(tensor: *const SigctlTensor, buf: *mut f64, buf_len: usize) -> SigctlStatus {
    guard(|| {
        let t = deref(tensor, "tensor")?;
        check_out(buf, "buf")?;
        let flat = t.0.flatten();
        if buf_len < flat.len() {
            return Err((
                SigctlStatus::BufferTooSmall,
                format!("buffer holds {buf_len} values, {} needed", flat.len()),
            ));
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), buf, flat.len());
        Ok(())
    })
}

/// Truncated tensor product `a ⊗ b`.
#[no_mangle]
pub unsafe extern "C" fn sigctl_tensor_product(
    a: *const SigctlTensor,
    b: *const SigctlTensor,
    out: *mut *mut SigctlTensor,
) -> SigctlStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        check_out(out, "out")?;
        let p = lib(a.0.product(&b.0))?;
        *out = Box::into_raw(Box::new(SigctlTensor(p)));
        Ok(())
    })
}

/// Squared Euclidean distance between coefficient vectors.
#[no_mangle]
pub unsafe extern "C" fn sigctl_tensor_distance_squared(
    a: *const SigctlTensor,
    b: *const SigctlTensor,
    out: *mut f64,
) -> SigctlStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        check_out(out, "out")?;
        *out = lib(a.0.distance_squared(&b.0))?;
        Ok(())
    })
}

/// Untruncated signature kernel by the PDE solver. `bandwidth` is ignored for
/// the linear static kernel.
#[no_mangle]
pub unsafe extern "C" fn sigctl_signature_kernel(
    x: *const SigctlPath,
    y: *const SigctlPath,
    static_kernel: SigctlStaticKernel,
    bandwidth: f64,
    dyadic_order: u32,
    out: *mut f64,
) -> SigctlStatus {
    guard(|| {
        let (x, y) = (deref(x, "x")?, deref(y, "y")?);
        check_out(out, "out")?;
        let cfg = SignatureKernelConfig {
            static_kernel: match static_kernel {
                SigctlStaticKernel::Linear => StaticKernel::Linear,
                SigctlStaticKernel::Rbf => StaticKernel::Rbf { bandwidth },
            },
            ..SignatureKernelConfig::linear(dyadic_order)
        };
        *out = lib(sigkernel::kernel(&x.0, &y.0, &cfg))?;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sigctl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
