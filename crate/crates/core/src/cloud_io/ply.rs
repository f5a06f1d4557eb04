//! Minimal PLY reader/writer for vertex tables (ascii and binary little endian).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            ScalarType::I8 => "char",
            ScalarType::U8 => "uchar",
            ScalarType::I16 => "short",
            ScalarType::U16 => "ushort",
            ScalarType::I32 => "int",
            ScalarType::U32 => "uint",
            ScalarType::F32 => "float",
            ScalarType::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    /// Full-scale value used to map integer color channels to [0,1].
    pub fn integer_max(self) -> Option<f64> {
        match self {
            ScalarType::U8 => Some(255.0),
            ScalarType::U16 => Some(65535.0),
            _ => None,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn encode_le(self, v: f64, out: &mut Vec<u8>) {
        match self {
            ScalarType::I8 => out.push(v as i8 as u8),
            ScalarType::U8 => out.push(v as u8),
            ScalarType::I16 => out.extend((v as i16).to_le_bytes()),
            ScalarType::U16 => out.extend((v as u16).to_le_bytes()),
            ScalarType::I32 => out.extend((v as i32).to_le_bytes()),
            ScalarType::U32 => out.extend((v as u32).to_le_bytes()),
            ScalarType::F32 => out.extend((v as f32).to_le_bytes()),
            ScalarType::F64 => out.extend(v.to_le_bytes()),
        }
    }

    fn format_ascii(self, v: f64) -> String {
        match self {
            ScalarType::F32 => format!("{}", v as f32),
            ScalarType::F64 => format!("{v}"),
            _ => format!("{}", v as i64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<(String, PropKind)>,
}

/// Columns of the `vertex` element, decoded to `f64`.
#[derive(Debug, Clone, Default)]
pub struct VertexTable {
    pub count: usize,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub ty: ScalarType,
    pub values: Vec<f64>,
}

impl VertexTable {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

pub fn read_vertex_table<R: BufRead>(mut reader: R) -> Result<VertexTable> {
    let mut line_no = 0usize;
    let mut line = String::new();
    let next_line = |reader: &mut R, line: &mut String, line_no: &mut usize| -> Result<bool> {
        line.clear();
        let n = reader.read_line(line)?;
        *line_no += 1;
        Ok(n > 0)
    };

    if !next_line(&mut reader, &mut line, &mut line_no)? || line.trim_end() != "ply" {
        return perr(1, "missing 'ply' magic");
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !next_line(&mut reader, &mut line, &mut line_no)? {
            return perr(line_no, "unexpected end of header");
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, ver] => {
                if *ver != "1.0" {
                    return perr(line_no, format!("unsupported version {ver}"));
                }
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLittleEndian,
                    other => return perr(line_no, format!("unsupported format {other}")),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .or_else(|_| perr(line_no, format!("bad element count {count}")))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            ["property", "list", cty, ity, name] => {
                let (Some(count), Some(item)) = (ScalarType::parse(cty), ScalarType::parse(ity))
                else {
                    return perr(line_no, format!("unknown list types {cty} {ity}"));
                };
                let Some(el) = elements.last_mut() else {
                    return perr(line_no, "property before element");
                };
                el.props.push((name.to_string(), PropKind::List { count, item }));
            }
            ["property", ty, name] => {
                let Some(ty) = ScalarType::parse(ty) else {
                    return perr(line_no, format!("unknown property type {ty}"));
                };
                let Some(el) = elements.last_mut() else {
                    return perr(line_no, "property before element");
                };
                el.props.push((name.to_string(), PropKind::Scalar(ty)));
            }
            _ => return perr(line_no, format!("unrecognized header line '{}'", line.trim_end())),
        }
    }
    let Some(encoding) = encoding else {
        return perr(line_no, "header has no format line");
    };

    let mut table = VertexTable::default();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        if is_vertex {
            table.count = el.count;
            for (name, kind) in &el.props {
                if let PropKind::Scalar(ty) = kind {
                    table.columns.push(Column {
                        name: name.clone(),
                        ty: *ty,
                        values: Vec::with_capacity(el.count),
                    });
                }
            }
        }
        match encoding {
            Encoding::Ascii => {
                for _ in 0..el.count {
                    if !next_line(&mut reader, &mut line, &mut line_no)? {
                        return perr(line_no, format!("truncated {} element", el.name));
                    }
                    let mut toks = line.split_whitespace();
                    let mut col = 0;
                    for (pname, kind) in &el.props {
                        let mut take = |ty: ScalarType| -> Result<f64> {
                            let Some(t) = toks.next() else {
                                return perr(line_no, format!("missing value for {pname}"));
                            };
                            let v = if ty == ScalarType::F32 { t.parse::<f32>().map(f64::from) } else { t.parse::<f64>() };
                            v.or_else(|_| perr(line_no, format!("bad number '{t}' for {pname}")))
                        };
                        match kind {
                            PropKind::Scalar(ty) => {
                                let v = take(*ty)?;
                                if is_vertex {
                                    table.columns[col].values.push(v);
                                    col += 1;
                                }
                            }
                            PropKind::List { .. } => {
                                let n = take(ScalarType::U32)? as usize;
                                for _ in 0..n {
                                    take(ScalarType::F64)?;
                                }
                            }
                        }
                    }
                }
            }
            Encoding::BinaryLittleEndian => {
                let fixed: Option<usize> = el
                    .props
                    .iter()
                    .map(|(_, k)| match k {
                        PropKind::Scalar(t) => Some(t.size()),
                        PropKind::List { .. } => None,
                    })
                    .sum();
                let mut buf = [0u8; 8];
                if let (Some(stride), true) = (fixed, is_vertex) {
                    let mut rec = vec![0u8; stride];
                    for _ in 0..el.count {
                        reader.read_exact(&mut rec).or_else(|_| {
                            perr(line_no, format!("truncated binary {} element", el.name))
                        })?;
                        let mut off = 0;
                        for (col, (_, kind)) in el.props.iter().enumerate() {
                            let PropKind::Scalar(t) = kind else { unreachable!() };
                            table.columns[col].values.push(t.decode_le(&rec[off..]));
                            off += t.size();
                        }
                    }
                } else {
                    for _ in 0..el.count {
                        let mut col = 0;
                        for (_, kind) in &el.props {
                            match kind {
                                PropKind::Scalar(t) => {
                                    reader.read_exact(&mut buf[..t.size()])?;
                                    if is_vertex {
                                        table.columns[col].values.push(t.decode_le(&buf));
                                        col += 1;
                                    }
                                }
                                PropKind::List { count, item } => {
                                    reader.read_exact(&mut buf[..count.size()])?;
                                    let n = count.decode_le(&buf) as usize;
                                    let mut skip = vec![0u8; n * item.size()];
                                    reader.read_exact(&mut skip)?;
                                }
                            }
                        }
                    }
                }
            }
        }
        if is_vertex {
            // nothing after the vertex element is needed
            break;
        }
    }
    Ok(table)
}

pub fn write_vertex_table<W: Write>(mut w: W, table: &VertexTable, encoding: Encoding) -> Result<()> {
    let fmt = match encoding {
        Encoding::Ascii => "ascii",
        Encoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut header = format!("ply\nformat {fmt} 1.0\nelement vertex {}\n", table.count);
    for c in &table.columns {
        header.push_str(&format!("property {} {}\n", c.ty.name(), c.name));
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    match encoding {
        Encoding::Ascii => {
            let mut line = String::new();
            for i in 0..table.count {
                line.clear();
                for (j, c) in table.columns.iter().enumerate() {
                    if j > 0 {
                        line.push(' ');
                    }
                    line.push_str(&c.ty.format_ascii(c.values[i]));
                }
                line.push('\n');
                w.write_all(line.as_bytes())?;
            }
        }
        Encoding::BinaryLittleEndian => {
            let mut buf = Vec::with_capacity(64);
            for i in 0..table.count {
                buf.clear();
                for c in &table.columns {
                    c.ty.encode_le(c.values[i], &mut buf);
                }
                w.write_all(&buf)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
