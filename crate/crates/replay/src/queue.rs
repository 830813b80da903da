//! Bounded inter-stage queue with a drop-oldest overflow policy.
//!
//! A full queue evicts its oldest unprocessed entry when a new one arrives;
//! stale frames are worthless to a live perception stack. Drops are counted
//! per queue.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

struct Inner<T> {
    queue: Mutex<State<T>>,
    not_empty: Condvar,
    dropped: AtomicU64,
    capacity: usize,
}

struct State<T> {
    items: VecDeque<T>,
    closed: bool,
}

pub struct Sender<T> {
    inner: Arc<Inner<T>>,
}

pub struct Receiver<T> {
    inner: Arc<Inner<T>>,
}

pub fn bounded<T>(capacity: usize) -> (Sender<T>, Receiver<T>) {
    assert!(capacity > 0, "queue capacity must be positive");
    let inner = Arc::new(Inner {
        queue: Mutex::new(State {
            items: VecDeque::with_capacity(capacity),
            closed: false,
        }),
        not_empty: Condvar::new(),
        dropped: AtomicU64::new(0),
        capacity,
    });
    (
        Sender { inner: inner.clone() },
        Receiver { inner },
    )
}

impl<T> Sender<T> {
    /// Push an item, evicting the oldest queued one when full. Returns the
    /// number of items dropped by this call (0 or 1).
    pub fn push(&self, item: T) -> u64 {
        let mut state = self.inner.queue.lock().unwrap();
        let mut dropped = 0;
        if state.items.len() == self.inner.capacity {
            state.items.pop_front();
            dropped = 1;
            self.inner.dropped.fetch_add(1, Ordering::Relaxed);
        }
        state.items.push_back(item);
        drop(state);
        self.inner.not_empty.notify_one();
        dropped
    }

    pub fn close(&self) {
        let mut state = self.inner.queue.lock().unwrap();
        state.closed = true;
        drop(state);
        self.inner.not_empty.notify_all();
    }

    pub fn dropped(&self) -> u64 {
        self.inner.dropped.load(Ordering::Relaxed)
    }
}

impl<T> Drop for Sender<T> {
    fn drop(&mut self) {
        self.close();
    }
}

impl<T> Receiver<T> {
    /// Blocking pop; `None` once the queue is closed and drained.
    pub fn pop(&self) -> Option<T> {
        let mut state = self.inner.queue.lock().unwrap();
        loop {
            if let Some(item) = state.items.pop_front() {
                return Some(item);
            }
            if state.closed {
                return None;
            }
            state = self.inner.not_empty.wait(state).unwrap();
        }
    }

    pub fn dropped(&self) -> u64 {
        self.inner.dropped.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;
    use std::time::Duration;

    #[test]
    fn fifo_within_capacity() {
        let (tx, rx) = bounded(4);
        for i in 0..4 {
            assert_eq!(tx.push(i), 0);
        }
        tx.close();
        let got: Vec<i32> = std::iter::from_fn(|| rx.pop()).collect();
        assert_eq!(got, vec![0, 1, 2, 3]);
        assert_eq!(rx.dropped(), 0);
    }

    #[test]
    fn overflow_drops_oldest() {
        let (tx, rx) = bounded(2);
        for i in 0..5 {
            tx.push(i);
        }
        tx.close();
        let got: Vec<i32> = std::iter::from_fn(|| rx.pop()).collect();
        assert_eq!(got, vec![3, 4], "oldest entries were evicted");
        assert_eq!(rx.dropped(), 3);
    }

    #[test]
    fn pop_blocks_until_push_or_close() {
        let (tx, rx) = bounded::<u32>(1);
        let handle = thread::spawn(move || rx.pop());
        thread::sleep(Duration::from_millis(20));
        tx.push(7);
        assert_eq!(handle.join().unwrap(), Some(7));

        let (tx, rx) = bounded::<u32>(1);
        let handle = thread::spawn(move || rx.pop());
        thread::sleep(Duration::from_millis(20));
        tx.close();
        assert_eq!(handle.join().unwrap(), None);
    }

    #[test]
    fn sender_drop_closes() {
        let (tx, rx) = bounded::<u32>(1);
        tx.push(1);
        drop(tx);
        assert_eq!(rx.pop(), Some(1));
        assert_eq!(rx.pop(), None);
    }
}
