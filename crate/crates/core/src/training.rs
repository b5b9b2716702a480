use crate::dataset::{Image, LabeledSet};
use crate::error::{Error, Result};

/// Read-only access to per-class training images, materialised or generated
/// on the fly. Images of a class are always visited in the same order.
pub trait ClassSource: Send + Sync {
    fn num_classes(&self) -> usize;

    fn class_len(&self, class: usize) -> usize;

    /// Dimensions shared by all images, `None` when the source is empty.
    fn dims(&self) -> Option<(usize, usize)>;

    fn for_each_image(&self, class: usize, f: &mut dyn FnMut(&Image));

    fn require_nonempty_classes(&self) -> Result<()> {
        match (0..self.num_classes()).find(|&c| self.class_len(c) == 0) {
            Some(c) => Err(Error::contract(format!("training class {c} is empty"))),
            None => Ok(()),
        }
    }

    fn len(&self) -> usize {
        (0..self.num_classes()).map(|c| self.class_len(c)).sum()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ClassSource for LabeledSet {
    fn num_classes(&self) -> usize {
        LabeledSet::num_classes(self)
    }

    fn class_len(&self, class: usize) -> usize {
        self.class(class).len()
    }

    fn dims(&self) -> Option<(usize, usize)> {
        LabeledSet::dims(self)
    }

    fn for_each_image(&self, class: usize, f: &mut dyn FnMut(&Image)) {
        self.class(class).iter().for_each(f);
    }
}

/// A bare slice of images acting as a single class.
pub struct SingleClass<'a>(pub &'a [Image]);

impl ClassSource for SingleClass<'_> {
    fn num_classes(&self) -> usize {
        1
    }

    fn class_len(&self, _class: usize) -> usize {
        self.0.len()
    }

    fn dims(&self) -> Option<(usize, usize)> {
        self.0.first().map(Image::dims)
    }

    fn for_each_image(&self, _class: usize, f: &mut dyn FnMut(&Image)) {
        self.0.iter().for_each(f);
    }
}
