#pragma once

#include <map>
#include <string>
#include <string_view>

// Built-in nonbreaking-prefix lists, byte-identical to the files shipped
// under data/nonbreaking_prefixes/ (a test enforces parity). Format: one
// prefix per line, '#' starts a comment line, a trailing "#NUMERIC_ONLY#"
// marker means the prefix keeps its period only before a number.

namespace tmkit::postprocess::detail {

inline constexpr std::string_view kPrefixesEn = R"(#Anything in this file, followed by a period (and an upper-case word), does NOT indicate an end-of-sentence marker.
#Special cases are included for prefixes that ONLY appear before 0-9 numbers.

#any single upper case letter followed by a period is not a sentence ender
#usually upper case letters are initials in a name
A
B
C
D
E
F
G
H
I
J
K
L
M
N
O
P
Q
R
S
T
U
V
W
X
Y
Z

#List of titles. These are often followed by upper-case names, but do not indicate sentence breaks
Adj
Adm
Adv
Asst
Bart
Bldg
Brig
Bros
Capt
Cmdr
Col
Comdr
Con
Corp
Cpl
DR
Dr
Drs
Ens
Gen
Gov
Hon
Hr
Hosp
Insp
Lt
MM
MR
MRS
MS
Maj
Messrs
Mlle
Mme
Mr
Mrs
Ms
Msgr
Op
Ord
Pfc
Ph
Prof
Pvt
Rep
Reps
Res
Rev
Rt
Sen
Sens
Sfc
Sgt
Sr
St
Supt
Surg

#misc - odd period-ending items that NEVER indicate breaks (p.m. does NOT fall into this category - it sometimes ends a sentence)
v
vs
i.e
rev
e.g

#Numbers only. These should only induce breaks when followed by a numeric sequence
# add NUMERIC_ONLY after the word for this function
#This case is mostly for the english "No." which can either be a sentence of its own, or
#if followed by a number, a non-breaking prefix
No #NUMERIC_ONLY#
Nos
Art #NUMERIC_ONLY#
Nr
pp #NUMERIC_ONLY#
)";

inline constexpr std::string_view kPrefixesDe = R"(#Anything in this file, followed by a period (and an upper-case word), does NOT indicate an end-of-sentence marker.
#Special cases are included for prefixes that ONLY appear before 0-9 numbers.

#any single upper case letter followed by a period is not a sentence ender
#usually upper case letters are initials in a name
#no German words end in single lower-case letters, so we throw those in too
A
B
C
D
E
F
G
H
I
J
K
L
M
N
O
P
Q
R
S
T
U
V
W
X
Y
Z
a
b
c
d
e
f
g
h
i
j
k
l
m
n
o
p
q
r
s
t
u
v
w
x
y
z

#Roman Numerals. A dot after one of these is not a sentence break in German.
II
III
IV
VI
VII
VIII
IX
XI
XII
XIII
XIV
XV
XVI
XVII
XVIII
XIX
XX
ii
iii
iv
vi
vii
viii
ix
xi
xii

#Titles and Honorifics
Adj
Adm
Adv
Asst
Bart
Bldg
Brig
Bros
Capt
Cmdr
Col
Comdr
Con
Corp
Cpl
DR
Dr
Ens
Gen
Gov
Hon
Hosp
Insp
Lt
MM
MR
MRS
MS
Maj
Messrs
Mlle
Mme
Mr
Mrs
Ms
Msgr
Op
Ord
Pfc
Ph
Prof
Pvt
Rep
Reps
Res
Rev
Rt
Sen
Sens
Sfc
Sgt
Sr
St
Supt
Surg

#Misc German abbreviations
bzw
d
desgl
dgl
ebd
eigtl
engl
evtl
frz
geb
gegr
gem
ggf
hrsg
inkl
insb
lat
Mio
Mrd
max
min
näml
od
österr
sog
u
usw
v
vgl
vs
wiss
z
zzt

#Numbers only. These should only induce breaks when followed by a numeric sequence
# add NUMERIC_ONLY after the word for this function
Nr #NUMERIC_ONLY#
Art #NUMERIC_ONLY#
ca
S #NUMERIC_ONLY#
Tel #NUMERIC_ONLY#
)";

inline constexpr std::string_view kPrefixesFr = R"(#Anything in this file, followed by a period (and an upper-case word), does NOT indicate an end-of-sentence marker.
#Special cases are included for prefixes that ONLY appear before 0-9 numbers.

#any single upper case letter followed by a period is not a sentence ender
A
B
C
D
E
F
G
H
I
J
K
L
M
N
O
P
Q
R
S
T
U
V
W
X
Y
Z

#Titles and abbreviations
Dr
Pr
M
MM
Mme
Mmes
Mlle
Mlles
Mgr
Me
Mr
Mrs
Ms
St
Ste
Sté
art
cf
ch
éd
ex
fig
etc
vol
vs

#Numbers only
no #NUMERIC_ONLY#
Nos
pp #NUMERIC_ONLY#
p #NUMERIC_ONLY#
)";

inline constexpr std::string_view kPrefixesEs = R"(#Anything in this file, followed by a period (and an upper-case word), does NOT indicate an end-of-sentence marker.
#Special cases are included for prefixes that ONLY appear before 0-9 numbers.

#any single upper case letter followed by a period is not a sentence ender
A
B
C
D
E
F
G
H
I
J
K
L
M
N
O
P
Q
R
S
T
U
V
W
X
Y
Z

#Titles and abbreviations
Sr
Sra
Srta
D
Dña
Dr
Dra
Prof
Lic
Ing
Excmo
Ilmo
Ud
Uds
Vd
Vds
St
Sto
Sta
apdo
art
avda
cf
ej
esq
etc
fig
pág
págs
tel
vol
vs

#Numbers only
núm #NUMERIC_ONLY#
no #NUMERIC_ONLY#
pp #NUMERIC_ONLY#
p #NUMERIC_ONLY#
)";

inline constexpr std::string_view kPrefixesIt = R"(#Anything in this file, followed by a period (and an upper-case word), does NOT indicate an end-of-sentence marker.
#Special cases are included for prefixes that ONLY appear before 0-9 numbers.

#any single upper case letter followed by a period is not a sentence ender
A
B
C
D
E
F
G
H
I
J
K
L
M
N
O
P
Q
R
S
T
U
V
W
X
Y
Z

#Titles and abbreviations
Sig
Sigg
Dott
Dr
Prof
Ing
Avv
Arch
Geom
Rag
Mons
Sen
On
ecc
art
cfr
ca
es
fig
pag
pagg
tel
vol
vs
ss

#Numbers only
n #NUMERIC_ONLY#
pp #NUMERIC_ONLY#
p #NUMERIC_ONLY#
)";

inline constexpr std::string_view kPrefixesRo = R"(#Anything in this file, followed by a period (and an upper-case word), does NOT indicate an end-of-sentence marker.
#Special cases are included for prefixes that ONLY appear before 0-9 numbers.

#any single upper case letter followed by a period is not a sentence ender
A
B
C
D
E
F
G
H
I
J
K
L
M
N
O
P
Q
R
S
T
U
V
W
X
Y
Z

#Titles and abbreviations
dl
dlui
dna
dnei
dr
drd
ing
prof
acad
av
lt
col
gen
mr
sf
str
şos
bd
cap
cca
etc
fig
pag
resp
vol
vs

#Numbers only
nr #NUMERIC_ONLY#
art #NUMERIC_ONLY#
pp #NUMERIC_ONLY#
p #NUMERIC_ONLY#
)";

inline constexpr std::string_view kPrefixesCs = R"(#Anything in this file, followed by a period (and an upper-case word), does NOT indicate an end-of-sentence marker.
#Special cases are included for prefixes that ONLY appear before 0-9 numbers.

#any single upper case letter followed by a period is not a sentence ender
A
B
C
D
E
F
G
H
I
J
K
L
M
N
O
P
Q
R
S
T
U
V
W
X
Y
Z

#Titles and abbreviations
Bc
Ing
Mgr
MUDr
JUDr
PhDr
RNDr
doc
prof
dr
p
pí
sl
fa
fy
aj
apod
atd
atp
event
mj
např
popř
př
přib
resp
tj
tzn
tzv
zvl
kap
odst
písm
ul
nám
hod
min
sek
str
sv
sb

#Numbers only
č #NUMERIC_ONLY#
čís #NUMERIC_ONLY#
tel #NUMERIC_ONLY#
pp #NUMERIC_ONLY#
)";

inline const std::map<std::string, std::string_view>& builtin_prefix_lists() {
  static const std::map<std::string, std::string_view> kLists = {
      {"en", kPrefixesEn}, {"de", kPrefixesDe}, {"fr", kPrefixesFr},
      {"es", kPrefixesEs}, {"it", kPrefixesIt}, {"ro", kPrefixesRo},
      {"cs", kPrefixesCs},
  };
  return kLists;
}

}  // namespace tmkit::postprocess::detail
