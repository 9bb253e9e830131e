//! Structured matrix decision variables and their scalar vectorization.

use nalgebra::DMatrix;

use super::expr::{AffineMatrix, LinExpr};

/// Free-parameter structure of a matrix variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    /// Symmetric; one scalar per upper-triangular entry.
    Symmetric,
    /// Unstructured.
    Full,
    /// Entries with `false` in the mask are structural zeros.
    Masked(DMatrix<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub structure: Structure,
    offset: usize,
    /// Row-major map from matrix entry to local scalar index.
    map: Vec<Option<usize>>,
    len: usize,
}

impl VarDecl {
    /// Number of scalar unknowns.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn offset(&self) -> usize {
        self.offset
    }
}

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

/// Ordered collection of decision variables; the scalar vector `x` is the
/// concatenation of every variable's free entries in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarRegistry {
    decls: Vec<VarDecl>,
    n_scalars: usize,
}

impl VarRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, rows: usize, cols: usize, structure: Structure) -> VarId {
        let mut map = vec![None; rows * cols];
        let mut len = 0;
        match &structure {
            Structure::Symmetric => {
                assert_eq!(rows, cols, "symmetric variable must be square");
                for j in 0..cols {
                    for i in 0..=j {
                        map[i * cols + j] = Some(len);
                        map[j * cols + i] = Some(len);
                        len += 1;
                    }
                }
            }
            Structure::Full => {
                for (k, slot) in map.iter_mut().enumerate() {
                    *slot = Some(k);
                }
                len = rows * cols;
            }
            Structure::Masked(mask) => {
                assert_eq!(mask.shape(), (rows, cols), "mask shape mismatch");
                for i in 0..rows {
                    for j in 0..cols {
                        if mask[(i, j)] {
                            map[i * cols + j] = Some(len);
                            len += 1;
                        }
                    }
                }
            }
        }
        let decl = VarDecl { name: name.to_string(), rows, cols, structure, offset: self.n_scalars, map, len };
        self.n_scalars += len;
        self.decls.push(decl);
        VarId(self.decls.len() - 1)
    }

    pub fn symmetric(&mut self, name: &str, n: usize) -> VarId {
        self.push(name, n, n, Structure::Symmetric)
    }

    pub fn full(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        self.push(name, rows, cols, Structure::Full)
    }

    pub fn masked(&mut self, name: &str, mask: DMatrix<bool>) -> VarId {
        let (rows, cols) = mask.shape();
        self.push(name, rows, cols, Structure::Masked(mask))
    }

    pub fn scalar(&mut self, name: &str) -> VarId {
        self.push(name, 1, 1, Structure::Full)
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn decls(&self) -> &[VarDecl] {
        &self.decls
    }

    pub fn decl(&self, id: VarId) -> &VarDecl {
        &self.decls[id.0]
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.decls.iter().position(|d| d.name == name).map(VarId)
    }

    /// The variable as an affine matrix of its scalar unknowns.
    pub fn matrix(&self, id: VarId) -> AffineMatrix {
        let d = &self.decls[id.0];
        AffineMatrix::from_fn(d.rows, d.cols, |i, j| match d.map[i * d.cols + j] {
            Some(k) => LinExpr::var(d.offset + k, 1.0),
            None => LinExpr::default(),
        })
    }

    /// The scalar variable `id` as a linear form.
    pub fn scalar_expr(&self, id: VarId) -> LinExpr {
        let d = &self.decls[id.0];
        assert_eq!((d.rows, d.cols), (1, 1), "not a scalar variable");
        LinExpr::var(d.offset, 1.0)
    }

    /// Numeric value of variable `id` at the scalar vector `x`.
    pub fn value(&self, id: VarId, x: &[f64]) -> DMatrix<f64> {
        let d = &self.decls[id.0];
        DMatrix::from_fn(d.rows, d.cols, |i, j| d.map[i * d.cols + j].map_or(0.0, |k| x[d.offset + k]))
    }

    /// Writes a numeric matrix into the scalar slots of `id`. Entries outside
    /// the free structure are ignored; symmetric variables take the upper triangle.
    pub fn set_value(&self, id: VarId, value: &DMatrix<f64>, x: &mut [f64]) {
        let d = &self.decls[id.0];
        assert_eq!(value.shape(), (d.rows, d.cols), "value shape mismatch");
        for i in 0..d.rows {
            for j in 0..d.cols {
                if matches!(d.structure, Structure::Symmetric) && i > j {
                    continue;
                }
                if let Some(k) = d.map[i * d.cols + j] {
                    x[d.offset + k] = value[(i, j)];
                }
            }
        }
    }
}
