"""Acquire/release primitives for the spin-wait synchronization kernels.

numba has no portable memory-ordering intrinsics, so these wrap the LLVM
atomic instructions directly. Flags live in int64 arrays: one writer ever
stores to a slot (release), any reader polls it (acquire). cpu_yield calls
sched_yield through an external symbol instead of ctypes so the enclosing
kernels stay disk-cacheable.
"""

from __future__ import annotations

from llvmlite import ir
from numba import types
from numba.core import cgutils
from numba.extending import intrinsic

__all__ = ["load_acquire", "store_release", "fetch_add", "cpu_yield"]


def _item_ptr(context, builder, arr_type, arr_val, idx):
    ary = context.make_array(arr_type)(context, builder, arr_val)
    return cgutils.get_item_pointer(
        context, builder, arr_type, ary, [idx], wraparound=False
    )


@intrinsic
def load_acquire(typingctx, arr, idx):
    """Atomic acquire load of arr[idx] from an int64 array."""
    if not isinstance(arr, types.Array) or arr.dtype != types.int64:
        return None
    sig = types.int64(arr, types.intp)

    def codegen(context, builder, signature, args):
        ptr = _item_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.load_atomic(ptr, ordering="acquire", align=8)

    return sig, codegen


@intrinsic
def store_release(typingctx, arr, idx, val):
    """Atomic release store of val into arr[idx]."""
    if not isinstance(arr, types.Array) or arr.dtype != types.int64:
        return None
    sig = types.void(arr, types.intp, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _item_ptr(context, builder, signature.args[0], args[0], args[1])
        builder.store_atomic(args[2], ptr, ordering="release", align=8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def fetch_add(typingctx, arr, idx, val):
    """Atomic fetch-and-add on arr[idx], sequentially consistent."""
    if not isinstance(arr, types.Array) or arr.dtype != types.int64:
        return None
    sig = types.int64(arr, types.intp, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _item_ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("add", ptr, args[2], ordering="seq_cst")

    return sig, codegen


@intrinsic
def cpu_yield(typingctx):
    """Yield the processor mid spin-wait (external sched_yield call)."""
    sig = types.void()

    def codegen(context, builder, signature, args):
        fnty = ir.FunctionType(ir.IntType(32), [])
        fn = builder.module.globals.get("sched_yield")
        if fn is None:
            fn = ir.Function(builder.module, fnty, "sched_yield")
        builder.call(fn, [])
        return context.get_dummy_value()

    return sig, codegen
