//! Single-producer single-consumer triple buffer for small `Copy` values.
//!
//! The writer and reader each own one slot; the third is the hand-over slot.
//! Publishing and fetching are a single atomic swap each, so neither side
//! ever waits on the other.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, AtomicU8, Ordering};
use std::sync::Arc;

const INDEX_MASK: u8 = 0b011;
const DIRTY: u8 = 0b100;

struct Shared<T> {
    slots: [UnsafeCell<T>; 3],
    /// Hand-over slot index plus the dirty flag.
    state: AtomicU8,
    closed: AtomicBool,
}

// Each slot is touched by at most one side at a time: ownership of an index
// moves only through the `state` swap, which orders the accesses.
unsafe impl<T: Send> Sync for Shared<T> {}

pub struct Writer<T> {
    shared: Arc<Shared<T>>,
    index: u8,
}

pub struct Reader<T> {
    shared: Arc<Shared<T>>,
    index: u8,
}

pub fn triple_buffer<T: Copy + Send>(initial: T) -> (Writer<T>, Reader<T>) {
    let shared = Arc::new(Shared {
        slots: [
            UnsafeCell::new(initial),
            UnsafeCell::new(initial),
            UnsafeCell::new(initial),
        ],
        state: AtomicU8::new(1),
        closed: AtomicBool::new(false),
    });
    (
        Writer {
            shared: shared.clone(),
            index: 0,
        },
        Reader { shared, index: 2 },
    )
}

impl<T: Copy + Send> Writer<T> {
    /// Publishes `value`; a later publish before the next read replaces it.
    pub fn publish(&mut self, value: T) {
        // SAFETY: the writer exclusively owns `self.index`.
        unsafe { *self.shared.slots[self.index as usize].get() = value };
        let prev = self
            .shared
            .state
            .swap(self.index | DIRTY, Ordering::AcqRel);
        self.index = prev & INDEX_MASK;
    }

    pub fn is_closed(&self) -> bool {
        self.shared.closed.load(Ordering::Acquire)
    }
}

impl<T: Copy + Send> Reader<T> {
    /// Latest published value, or the previous one if nothing new arrived.
    pub fn read(&mut self) -> T {
        if self.shared.state.load(Ordering::Relaxed) & DIRTY != 0 {
            let prev = self.shared.state.swap(self.index, Ordering::AcqRel);
            self.index = prev & INDEX_MASK;
        }
        // SAFETY: the reader exclusively owns `self.index`.
        unsafe { *self.shared.slots[self.index as usize].get() }
    }

    pub fn has_update(&self) -> bool {
        self.shared.state.load(Ordering::Relaxed) & DIRTY != 0
    }

    pub fn close(&self) {
        self.shared.closed.store(true, Ordering::Release);
    }
}

impl<T> Drop for Reader<T> {
    fn drop(&mut self) {
        self.shared.closed.store(true, Ordering::Release);
    }
}
